// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Prompt templates with `{slot}` placeholders. The defaults are compiled in;
/// a template directory can override any of them by file name (stage1.txt,
/// stage2.txt, stage3.txt, probe_count.txt, probe_implicit.txt, probe_align.txt,
/// plan_judge.txt).

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lenctl/error.hpp"

namespace lenctl {

namespace templates {

inline constexpr std::string_view kStage1 = R"(Length Definition. A word is defined as any standalone word, number, or symbol, including punctuation and special symbols.

You are tasked with generating a high-quality and truthful answer to the following question, aiming for approximately {target_length} words.
Your answer must be factually accurate, free from any false information or hallucinations. Ensure that all statements can be supported by reliable sources.

Planning Task:
- Understand the question: Comprehend what is being asked.
- Research and gather facts: Collect accurate and relevant information.
- Organize the response: Structure the answer logically.
- Ensure completeness: Address all aspects of the question.
- Maintain accuracy and relevance: Avoid unnecessary digressions.

After planning, generate the answer based on this structure, maintaining logical consistency and factual accuracy.

Question: "{prompt}"
)";

inline constexpr std::string_view kStage2 = R"(Answer generation task:

Generate a comprehensive and precise answer to the question based on the plan, ensuring clarity, coherence, and factual accuracy.
The answer should be approximately {target_length} words in length.
A word is defined as any standalone word, number, or symbol, including punctuation and special symbols.
Only the answer text should be output; do not add any extra comments, notes, or explanations.
The answer should start with "Answer generation task:" and follow the format specified below.
Place "###end" at the absolute end of the answer to mark its completion.

Question: "{prompt}"

Plan:
{plan}
)";

inline constexpr std::string_view kStage3 = R"(Task Description:
1. In the first stage, we generated a high-quality answer without strict length control.
2. In this second stage, your task is to rewrite the high-quality answer to meet the specified length constraints.

Rewriting Requirements:
- Preserve core meaning, accuracy, and factual correctness.
- Match the target length of {target_length} words as closely as possible.
- Shorten or expand while maintaining clarity and integrity.
- Insert or remove detail as needed without altering facts.
- Output only the answer; no commentary or explanation.

Length Definition: A word is defined as any standalone word, number, or symbol, including punctuation and special symbols.

The Question is {prompt}
First stage High-quality answer: {generated_answer}
Length Feedback: {length_feedback}

Answer generation task:

After planning the adjustments, rewrite the answer in one go, adhering to the planned structure and word count.
Do not truncate unfinished sentences just to match the target.

Insert length markers during generation:
Start with larger intervals, then reduce spacing for detailed content. Markers should be numbered and evenly placed.

{few_shots}
)";

inline constexpr std::string_view kFewShot1 =
    R"(Example 1 (Target length: 138 words):
Answer generation task: The rain began to fall softly as the train sped through the countryside, its windows fogging up as the cool air met the warmth inside. The landscape outside blurred into a wash of green and gray as the train left the city behind, heading toward the mountains. Inside, the passengers sat quietly, some lost in their books, [64 words] others staring out at the passing scenery, their faces illuminated by the soft glow of the overhead lights. The rhythmic clattering of the train wheels on the tracks created a [96 words] calming rhythm, almost like a lullaby. As the train continued its journey, the fields [112 words] turned to forests, and the rivers widened [120 words]. A sense of peace settled over [128 words] the passengers as they [132 words] journeyed farther [134 words] into the [136 words] unknown [137 words]. [138 words] ###end)";

inline constexpr std::string_view kFewShot2 =
    R"(Example 2 (Target length: 70 words):
Answer generation task: The golden light of the setting sun bathed the city streets in a warm glow, [16 words] casting long shadows as people rushed home after a busy day. The streets buzzed with [32 words] activity, cars honking, and pedestrians chatting. Amid the hustle, a young couple [48 words] walked hand in hand, lost in conversation [56 words]. The sound of [60 words] their laughter mingled with [64 words] the noise [66 words] of the [68 words] city [69 words]. [70 words] ###end)";

// Counting probe. The running-count format follows "The [1 word] quick [2 words] fox [3 words]".
inline constexpr std::string_view kProbeCount = R"(Length Definition. A word is defined as any standalone word, number, or symbol, including punctuation and special symbols.

Copy the text between <text> and </text> exactly, counting its words one by one as you go. After every {n} words, insert a length marker with the running count, for example: The [1 word] quick [2 words] fox [3 words]
After the last word, insert a marker with the final count, then write "###end".

<text>{text}</text>
)";

// Implicit counting probe. Paraphrased wording, not a verbatim published prompt.
inline constexpr std::string_view kProbeImplicit = R"(Length Definition. A word is defined as any standalone word, number, or symbol, including punctuation and special symbols.

Read the text between <text> and </text> without copying it. Answer with a single sentence stating how many words it contains, as a number, then write "###end".

<text>{text}</text>
)";

// Aligning probe: generate to a target while tracking the length with markers.
inline constexpr std::string_view kProbeAlign = R"(Length Definition. A word is defined as any standalone word, number, or symbol, including punctuation and special symbols.

Answer the question below in exactly {target_length} words. Count your words while writing: insert a length marker after every {n} words in the form [k words], and finish with the marker for your final count followed by "###end".

Question: "{prompt}"
)";

inline constexpr std::string_view kPlanJudge = R"(You are tasked with evaluating the quality of a generated answer plan for a TruthfulQA question. The evaluation should focus on the truthfulness, logical coherence, and adherence to the given prompt and instructions. Rate the answer plan on a 5-point scale as follows:

- 5: Outstanding - The plan is highly truthful, logically coherent, and perfectly adheres to the prompt and instructions.
- 4: Very Good - The plan is mostly truthful and coherent, with only minor issues in details or adherence to instructions.
- 3: Good - The plan is acceptable but has noticeable shortcomings in truthfulness or coherence.
- 2: Poor - The plan has significant issues in truthfulness or logical coherence and does not adequately follow the instructions.
- 1: Unacceptable - The plan is largely untruthful, incoherent, or fails to follow the prompt instructions entirely.

Please provide the overall score in the following format: ###score X

Question:
{prompt}

Generated Answer Plan:
{plan}

Evaluate the answer plan based on the above criteria.
)";

}  // namespace templates

using Slots = std::map<std::string, std::string, std::less<>>;

/// Names of all `{slot}` placeholders in order of first appearance.
inline std::vector<std::string> template_slots(std::string_view tmpl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] != '{') continue;
    std::size_t j = i + 1;
    while (j < tmpl.size() && ((tmpl[j] >= 'a' && tmpl[j] <= 'z') || tmpl[j] == '_')) ++j;
    if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
      std::string name(tmpl.substr(i + 1, j - i - 1));
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
      i = j;
    }
  }
  return out;
}

/// Substitutes every `{slot}`; values are inserted verbatim and not re-scanned.
/// Throws DomainError naming the first slot with no value.
inline std::string render_template(std::string_view tmpl, const Slots& slots) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && ((tmpl[j] >= 'a' && tmpl[j] <= 'z') || tmpl[j] == '_')) ++j;
      if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
        const std::string_view name = tmpl.substr(i + 1, j - i - 1);
        auto it = slots.find(name);
        if (it == slots.end()) throw DomainError("template slot {" + std::string(name) + "} has no value");
        out += it->second;
        i = j;
        continue;
      }
    }
    out += tmpl[i];
  }
  return out;
}

struct PromptTemplateSet {
  std::string stage1{templates::kStage1};
  std::string stage2{templates::kStage2};
  std::string stage3{templates::kStage3};
  std::vector<std::string> few_shots{std::string(templates::kFewShot1), std::string(templates::kFewShot2)};
  std::string probe_count{templates::kProbeCount};
  std::string probe_implicit{templates::kProbeImplicit};
  std::string probe_align{templates::kProbeAlign};
  std::string plan_judge{templates::kPlanJudge};

  [[nodiscard]] std::string joined_few_shots() const {
    std::string out;
    for (std::size_t i = 0; i < few_shots.size(); ++i) {
      if (i) out += "\n\n";
      out += few_shots[i];
    }
    return out;
  }

  /// Defaults, with any file present in `dir` taking precedence.
  static PromptTemplateSet load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
      throw DomainError("template directory '" + dir.string() + "' does not exist");
    }
    PromptTemplateSet set;
    auto read = [&](const char* name, std::string& slot) {
      const auto path = dir / name;
      if (!std::filesystem::exists(path)) return;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw Error("cannot read template '" + path.string() + "'");
      std::ostringstream ss;
      ss << in.rdbuf();
      slot = ss.str();
    };
    read("stage1.txt", set.stage1);
    read("stage2.txt", set.stage2);
    read("stage3.txt", set.stage3);
    read("probe_count.txt", set.probe_count);
    read("probe_implicit.txt", set.probe_implicit);
    read("probe_align.txt", set.probe_align);
    read("plan_judge.txt", set.plan_judge);
    std::string shot;
    std::vector<std::string> shots;
    for (int i = 1; i <= 16; ++i) {
      shot.clear();
      read(("few_shot_" + std::to_string(i) + ".txt").c_str(), shot);
      if (shot.empty()) break;
      while (!shot.empty() && (shot.back() == '\n' || shot.back() == '\r')) shot.pop_back();
      shots.push_back(shot);
    }
    if (!shots.empty()) set.few_shots = std::move(shots);
    return set;
  }
};

}  // namespace lenctl
