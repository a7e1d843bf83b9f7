#pragma once

#include "blocknav/envgraph.hpp"
#include "blocknav/worldgen.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace blocknav {

class Vocabulary {
public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(int id) const;
  /// Throws SchemaViolation for words outside the vocabulary.
  int id(std::string_view word) const;
  std::vector<int> encode(std::string_view text) const;
  std::string decode(const std::vector<int>& ids) const;

private:
  std::vector<std::string> words_;
  std::map<std::string, int, std::less<>> index_;
};

std::string landmark_name(int landmark);

/// Template words followed by the names of landmarks 0..landmark_count-1.
Vocabulary make_vocabulary(std::size_t landmark_count);

struct InstructionRecord {
  std::string id;
  std::string split;
  std::vector<int> tokens;
  /// Half-open [start, end) token ranges, one per sentence.
  std::vector<std::pair<std::size_t, std::size_t>> sentence_spans;
  std::vector<NodeId> gold_path;
  std::vector<Action> gold_actions;
  double initial_heading = 0.0;
  /// T x N_s, 1 where the sentence describes the segment containing step t.
  std::vector<std::vector<std::uint8_t>> relevance_labels;
  std::vector<double> progress_labels;

  std::size_t steps() const { return gold_actions.size(); }
  std::size_t sentence_count() const { return sentence_spans.size(); }

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

/// One sentence per leg, a closing "stop ." sentence, and with probability
/// `filler_prob` per leg an unrelated distractor sentence labelled 0.
InstructionRecord generate_instruction(const EnvGraph& graph, const Route& route, const Vocabulary& vocab,
                                       std::uint64_t seed, double filler_prob);

/// Replays the gold actions and recomputes block progress labels.
std::vector<double> progress_labels_for(const EnvGraph& graph, NodeId start, double initial_heading,
                                        const std::vector<Action>& actions);

/// Checks tiling, label shapes, and gold replay. Throws SchemaViolation or
/// LabelLengthMismatch naming the offending field.
void validate_record(const EnvGraph& graph, const InstructionRecord& record, std::size_t vocab_size);

} // namespace blocknav
