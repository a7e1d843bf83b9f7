#include "blocknav/instruction.hpp"

#include "blocknav/errors.hpp"
#include "blocknav/rng.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace blocknav {
namespace {

constexpr std::array<std::string_view, 24> kLandmarkNames{
    "bank",    "cafe",   "church",  "school", "hotel",   "pharmacy", "bakery",  "library",
    "museum",  "park",   "theater", "hospital", "gym",   "market",   "station", "bar",
    "florist", "garage", "hydrant", "fountain", "statue", "kiosk",   "bridge",  "tower"};

constexpr std::array<std::string_view, 17> kTemplateWords{
    ".",        "go", "straight", "past",  "the", "turn", "left",   "right", "at",
    "continue", "to", "stop",     "there", "is",  "a",    "nearby", "corner"};

std::string place_name(const EnvGraph& g, NodeId n) {
  const int lm = g.landmark(n);
  return lm < 0 ? std::string("corner") : landmark_name(lm);
}

std::string leg_sentence(LegKind kind, const std::string& place) {
  switch (kind) {
  case LegKind::Straight: return "go straight past the " + place + " .";
  case LegKind::Left: return "turn left at the " + place + " .";
  case LegKind::Right: return "turn right at the " + place + " .";
  case LegKind::Final: return "continue to the " + place + " .";
  }
  return {};
}

[[noreturn]] void schema(const std::string& where, const std::string& what) {
  throw SchemaViolation(where + ": " + what);
}

} // namespace

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
      throw SchemaViolation("vocab[" + std::to_string(i) + "]: duplicate word '" + words_[i] + "'");
    }
  }
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw SchemaViolation("token id " + std::to_string(id) + " outside vocabulary");
  }
  return words_[static_cast<std::size_t>(id)];
}

int Vocabulary::id(std::string_view word) const {
  const auto it = index_.find(word);
  if (it == index_.end()) throw SchemaViolation("word '" + std::string(word) + "' not in vocabulary");
  return it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += word(ids[i]);
  }
  return out;
}

std::string landmark_name(int landmark) {
  if (landmark >= 0 && static_cast<std::size_t>(landmark) < kLandmarkNames.size()) {
    return std::string(kLandmarkNames[static_cast<std::size_t>(landmark)]);
  }
  return "landmark" + std::to_string(landmark);
}

Vocabulary make_vocabulary(std::size_t landmark_count) {
  std::vector<std::string> words(kTemplateWords.begin(), kTemplateWords.end());
  for (std::size_t i = 0; i < landmark_count; ++i) words.push_back(landmark_name(static_cast<int>(i)));
  return Vocabulary(std::move(words));
}

std::vector<double> progress_labels_for(const EnvGraph& graph, NodeId start, double initial_heading,
                                        const std::vector<Action>& actions) {
  std::vector<double> labels;
  labels.reserve(actions.size());
  AgentState s = initial_state(graph, start, initial_heading);
  for (Action a : actions) {
    labels.push_back(block_progress_label(graph, s));
    const auto next = step(graph, s, a);
    if (!next) break;
    s = *next;
  }
  return labels;
}

InstructionRecord generate_instruction(const EnvGraph& graph, const Route& route, const Vocabulary& vocab,
                                       std::uint64_t seed, double filler_prob) {
  rng::Engine eng(seed);
  const int max_landmark = static_cast<int>(vocab.size() - kTemplateWords.size());

  InstructionRecord rec;
  rec.gold_path = route.path;
  rec.gold_actions = route.actions;
  rec.initial_heading = route.initial_heading;

  std::vector<int> sentence_leg; // leg index per sentence, -1 filler, -2 stop
  auto add_sentence = [&](const std::string& text, int leg) {
    const auto ids = vocab.encode(text);
    const std::size_t begin = rec.tokens.size();
    rec.tokens.insert(rec.tokens.end(), ids.begin(), ids.end());
    rec.sentence_spans.emplace_back(begin, rec.tokens.size());
    sentence_leg.push_back(leg);
  };

  for (std::size_t i = 0; i < route.legs.size(); ++i) {
    const Leg& leg = route.legs[i];
    add_sentence(leg_sentence(leg.kind, place_name(graph, leg.end_node)), static_cast<int>(i));
    if (max_landmark > 0 && rng::bernoulli(eng, filler_prob)) {
      const int lm = static_cast<int>(rng::uniform_index(eng, static_cast<std::size_t>(max_landmark)));
      add_sentence("there is a " + landmark_name(lm) + " nearby .", -1);
    }
  }
  add_sentence("stop .", -2);

  const std::size_t T = route.actions.size();
  rec.relevance_labels.assign(T, std::vector<std::uint8_t>(rec.sentence_spans.size(), 0));
  for (std::size_t s = 0; s < sentence_leg.size(); ++s) {
    if (sentence_leg[s] == -2) {
      rec.relevance_labels[T - 1][s] = 1;
    } else if (sentence_leg[s] >= 0) {
      const Leg& leg = route.legs[static_cast<std::size_t>(sentence_leg[s])];
      for (std::size_t t = leg.first_step; t <= leg.last_step; ++t) rec.relevance_labels[t][s] = 1;
    }
  }
  rec.progress_labels = progress_labels_for(graph, route.path.front(), route.initial_heading, route.actions);
  return rec;
}

void validate_record(const EnvGraph& graph, const InstructionRecord& rec, std::size_t vocab_size) {
  const std::string where = "record " + rec.id;
  if (rec.tokens.empty()) schema(where + ".tokens", "empty instruction");
  for (std::size_t i = 0; i < rec.tokens.size(); ++i) {
    if (rec.tokens[i] < 0 || static_cast<std::size_t>(rec.tokens[i]) >= vocab_size) {
      schema(where + ".tokens[" + std::to_string(i) + "]", "token id outside vocabulary");
    }
  }
  std::size_t expect = 0;
  for (std::size_t i = 0; i < rec.sentence_spans.size(); ++i) {
    const auto [b, e] = rec.sentence_spans[i];
    if (b != expect || e <= b) {
      schema(where + ".sentence_spans[" + std::to_string(i) + "]", "spans must tile the tokens without gaps");
    }
    expect = e;
  }
  if (expect != rec.tokens.size()) schema(where + ".sentence_spans", "spans do not cover every token");

  const std::size_t T = rec.gold_actions.size();
  if (T == 0 || rec.gold_actions.back() != Action::Stop) schema(where + ".gold_actions", "must end with STOP");
  if (rec.relevance_labels.size() != T) {
    throw LabelLengthMismatch(where + ".relevance_labels: " + std::to_string(rec.relevance_labels.size()) +
                              " rows for " + std::to_string(T) + " steps");
  }
  if (rec.progress_labels.size() != T) {
    throw LabelLengthMismatch(where + ".progress_labels: " + std::to_string(rec.progress_labels.size()) +
                              " entries for " + std::to_string(T) + " steps");
  }
  for (std::size_t t = 0; t < T; ++t) {
    const auto& row = rec.relevance_labels[t];
    if (row.size() != rec.sentence_spans.size()) {
      throw LabelLengthMismatch(where + ".relevance_labels[" + std::to_string(t) + "]: width " +
                                std::to_string(row.size()) + ", expected " +
                                std::to_string(rec.sentence_spans.size()));
    }
    bool any = false;
    for (auto v : row) {
      if (v > 1) schema(where + ".relevance_labels[" + std::to_string(t) + "]", "labels must be 0 or 1");
      any = any || v == 1;
    }
    if (!any) schema(where + ".relevance_labels[" + std::to_string(t) + "]", "row has no relevant sentence");
    const double p = rec.progress_labels[t];
    if (!(p >= 0.0 && p <= 1.0)) schema(where + ".progress_labels[" + std::to_string(t) + "]", "outside [0, 1]");
  }

  if (rec.gold_path.empty()) schema(where + ".gold_path", "empty path");
  for (std::size_t i = 0; i < rec.gold_path.size(); ++i) {
    if (!graph.contains(rec.gold_path[i])) {
      schema(where + ".gold_path[" + std::to_string(i) + "]", "unknown node " + std::to_string(rec.gold_path[i]));
    }
  }
  AgentState s;
  try {
    s = initial_state(graph, rec.gold_path.front(), rec.initial_heading);
  } catch (const Error& e) {
    schema(where + ".initial_heading", e.what());
  }
  std::vector<NodeId> replay{s.node};
  for (std::size_t t = 0; t + 1 < T; ++t) {
    std::optional<AgentState> next;
    try {
      next = step(graph, s, rec.gold_actions[t]);
    } catch (const Error& e) {
      schema(where + ".gold_actions[" + std::to_string(t) + "]", e.what());
    }
    if (!next) schema(where + ".gold_actions[" + std::to_string(t) + "]", "STOP before the final step");
    if (rec.gold_actions[t] == Action::Forward) replay.push_back(next->node);
    s = *next;
  }
  if (replay != rec.gold_path) schema(where + ".gold_path", "replaying gold_actions does not reproduce the path");
}

} // namespace blocknav
