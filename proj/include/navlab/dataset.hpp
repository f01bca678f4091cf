#pragma once

// On-disk step-record corpus: a JSON-lines index (one record header per
// line, with the byte range of its payload) and a blob of payloads. Each
// payload is the egocentric map in "MUVM" layout followed by a "MUVO"
// observation block.

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "navlab/demogen.hpp"
#include "navlab/rewards.hpp"

namespace navlab {

struct DatasetPaths {
  std::string index;
  std::string blob;
  static DatasetPaths from_prefix(const std::string& prefix);
};

std::string encode_payload(const StepRecord& r);
/// Fills ego_map and frames of `r` from a payload.
void decode_payload(std::string_view bytes, StepRecord& r);

nlohmann::json record_header(const StepRecord& r);
/// Header fields only; ego_map and frames stay empty.
StepRecord parse_header(const nlohmann::json& j);

/// Append-only writer.
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::string& prefix);
  void append(const StepRecord& r);
  std::size_t size() const { return count_; }
  void close();

 private:
  std::ofstream index_;
  std::ofstream blob_;
  std::uint64_t offset_ = 0;
  std::size_t count_ = 0;
};

/// Seekable reader: headers are loaded eagerly, payloads on demand.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& prefix);
  std::size_t size() const { return headers_.size(); }
  const nlohmann::json& header(std::size_t i) const { return headers_.at(i); }
  StepRecord read(std::size_t i);
  std::vector<StepRecord> read_all();

 private:
  std::vector<nlohmann::json> headers_;
  std::ifstream blob_;
};

void save_dataset(const std::string& prefix, std::span<const StepRecord> records);
std::vector<StepRecord> load_dataset(const std::string& prefix);

/// Rewrites the index with the reward fields {raw, r, rtg} of `records`;
/// payloads are untouched. Records must be in index order.
void rewrite_index(const std::string& prefix, std::span<const StepRecord> records);

/// Labels every episode of a loaded corpus (records grouped by episode_id,
/// ordered by t).
void label_records(std::span<StepRecord> records, const RewardConfig& cfg);

}  // namespace navlab
