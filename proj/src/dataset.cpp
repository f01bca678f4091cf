#include "navlab/dataset.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "navlab/common.hpp"

namespace navlab {

DatasetPaths DatasetPaths::from_prefix(const std::string& prefix) {
  return {prefix + ".index.jsonl", prefix + ".blob"};
}

std::string encode_payload(const StepRecord& r) {
  std::ostringstream os;
  r.ego_map.write(os);
  os.write("MUVO", 4);
  io::write_u16(os, 1);
  io::write_u16(os, static_cast<std::uint16_t>(r.frames.size()));
  io::write_u16(os, static_cast<std::uint16_t>(r.frames[0].depth.size()));
  for (const auto& f : r.frames) {
    io::write_u32(os, static_cast<std::uint32_t>(f.pose.cell.x));
    io::write_u32(os, static_cast<std::uint32_t>(f.pose.cell.y));
    io::write_u8(os, static_cast<std::uint8_t>(f.pose.heading));
    for (std::size_t i = 0; i < f.depth.size(); ++i) {
      io::write_f32(os, f.depth[i]);
      io::write_u8(os, f.blocked[i]);
      io::write_u16(os, static_cast<std::uint16_t>(f.hits[i].category));
      io::write_f32(os, f.hits[i].distance);
    }
  }
  return os.str();
}

void decode_payload(std::string_view bytes, StepRecord& r) {
  std::istringstream is{std::string(bytes)};
  r.ego_map = SemanticMap::read(is, MapFrame::Egocentric);
  io::expect_magic(is, "MUVO");
  if (io::read_u16(is) != 1) throw FormatError("MUVO: unsupported version");
  const auto frames = io::read_u16(is);
  const auto rays = io::read_u16(is);
  if (frames != kHistoryFrames) throw FormatError("MUVO: expected 4 frames");
  for (auto& f : r.frames) {
    f.pose.cell.x = static_cast<int>(io::read_u32(is));
    f.pose.cell.y = static_cast<int>(io::read_u32(is));
    const auto h = io::read_u8(is);
    if (h > 3) throw FormatError("MUVO: bad heading");
    f.pose.heading = static_cast<Heading>(h);
    f.depth.resize(rays);
    f.blocked.resize(rays);
    f.hits.resize(rays);
    for (std::size_t i = 0; i < rays; ++i) {
      f.depth[i] = io::read_f32(is);
      f.blocked[i] = io::read_u8(is);
      f.hits[i].category = io::read_u16(is);
      f.hits[i].distance = io::read_f32(is);
    }
  }
}

nlohmann::json record_header(const StepRecord& r) {
  nlohmann::json j;
  j["episode"] = r.episode_id;
  j["world"] = r.world_seed;
  j["t"] = r.t;
  j["T"] = r.episode_length;
  j["goal"] = r.goal;
  j["source"] = to_string(r.source);
  j["outcome"] = to_string(r.outcome);
  auto labels = nlohmann::json::array();
  for (auto a : r.labels) labels.push_back(static_cast<int>(a));
  j["labels"] = labels;
  auto sectors = nlohmann::json::array();
  for (const auto& s : r.description.sectors) sectors.push_back({s.nearest_category, s.free_bucket});
  j["sectors"] = sectors;
  auto recent = nlohmann::json::array();
  for (auto a : r.description.recent_actions) recent.push_back(static_cast<int>(a));
  j["recent"] = recent;
  j["text"] = r.description.text;
  j["d"] = r.distance;
  j["d_end"] = r.final_distance;
  if (r.reward) {
    j["raw"] = r.reward->raw;
    j["r"] = r.reward->r;
    j["rtg"] = r.reward->rtg;
  }
  return j;
}

namespace {

Action parse_action(const nlohmann::json& v) {
  const int a = v.get<int>();
  if (a < 0 || a >= kNumActions) throw FormatError("dataset: action id out of range");
  return static_cast<Action>(a);
}

}  // namespace

StepRecord parse_header(const nlohmann::json& j) {
  try {
    StepRecord r;
    r.episode_id = j.at("episode").get<std::uint64_t>();
    r.world_seed = j.at("world").get<std::uint64_t>();
    r.t = j.at("t").get<int>();
    r.episode_length = j.at("T").get<int>();
    r.goal = j.at("goal").get<int>();
    r.source = parse_demo_kind(j.at("source").get<std::string>());
    r.outcome = parse_outcome(j.at("outcome").get<std::string>());
    const auto& labels = j.at("labels");
    if (labels.size() != kActionHorizon) throw FormatError("dataset: expected 4 action labels");
    for (int k = 0; k < kActionHorizon; ++k) r.labels[k] = parse_action(labels[k]);
    const auto& sectors = j.at("sectors");
    if (sectors.size() != kSectors) throw FormatError("dataset: expected 8 sectors");
    for (int s = 0; s < kSectors; ++s) {
      r.description.sectors[s] = {sectors[s].at(0).get<int>(), sectors[s].at(1).get<int>()};
    }
    for (const auto& a : j.at("recent")) r.description.recent_actions.push_back(parse_action(a));
    r.description.text = j.at("text").get<std::string>();
    // d_end may be null for episodes that never reached the goal (JSON has no inf).
    r.distance = j.at("d").is_null() ? kUnreachable : j.at("d").get<float>();
    r.final_distance = j.at("d_end").is_null() ? kUnreachable : j.at("d_end").get<float>();
    if (j.contains("rtg")) {
      r.reward = RewardLabel{j.at("raw").get<double>(), j.at("r").get<double>(), j.at("rtg").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }
}

DatasetWriter::DatasetWriter(const std::string& prefix) {
  const auto paths = DatasetPaths::from_prefix(prefix);
  index_.open(paths.index, std::ios::binary | std::ios::trunc);
  blob_.open(paths.blob, std::ios::binary | std::ios::trunc);
  if (!index_ || !blob_) throw FormatError("dataset: cannot create " + prefix);
}

void DatasetWriter::append(const StepRecord& r) {
  const auto payload = encode_payload(r);
  blob_.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  auto j = record_header(r);
  j["offset"] = offset_;
  j["length"] = payload.size();
  index_ << j.dump() << '\n';
  if (!index_ || !blob_) throw FormatError("dataset: write failed");
  offset_ += payload.size();
  ++count_;
}

void DatasetWriter::close() {
  index_.close();
  blob_.close();
}

DatasetReader::DatasetReader(const std::string& prefix) {
  const auto paths = DatasetPaths::from_prefix(prefix);
  std::ifstream index(paths.index, std::ios::binary);
  if (!index) throw FormatError("dataset: cannot open " + paths.index);
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    try {
      headers_.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(paths.index + ": " + e.what());
    }
  }
  blob_.open(paths.blob, std::ios::binary);
  if (!blob_) throw FormatError("dataset: cannot open " + paths.blob);
}

StepRecord DatasetReader::read(std::size_t i) {
  const auto& h = headers_.at(i);
  StepRecord r = parse_header(h);
  const auto offset = h.at("offset").get<std::uint64_t>();
  const auto length = h.at("length").get<std::uint64_t>();
  std::string bytes(length, '\0');
  blob_.seekg(static_cast<std::streamoff>(offset));
  blob_.read(bytes.data(), static_cast<std::streamsize>(length));
  if (!blob_) throw FormatError("dataset: payload out of range");
  decode_payload(bytes, r);
  return r;
}

std::vector<StepRecord> DatasetReader::read_all() {
  std::vector<StepRecord> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(read(i));
  return out;
}

void save_dataset(const std::string& prefix, std::span<const StepRecord> records) {
  DatasetWriter w(prefix);
  for (const auto& r : records) w.append(r);
  w.close();
}

std::vector<StepRecord> load_dataset(const std::string& prefix) { return DatasetReader(prefix).read_all(); }

void rewrite_index(const std::string& prefix, std::span<const StepRecord> records) {
  const auto paths = DatasetPaths::from_prefix(prefix);
  std::vector<nlohmann::json> headers;
  {
    DatasetReader reader(prefix);
    if (reader.size() != records.size()) throw FormatError("dataset: record count changed");
    for (std::size_t i = 0; i < reader.size(); ++i) headers.push_back(reader.header(i));
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto j = record_header(records[i]);
    j["offset"] = headers[i].at("offset");
    j["length"] = headers[i].at("length");
    os << j.dump() << '\n';
  }
  io::write_file(paths.index, os.str());
}

void label_records(std::span<StepRecord> records, const RewardConfig& cfg) {
  cfg.validate();
  std::map<std::uint64_t, std::vector<std::size_t>> episodes;
  for (std::size_t i = 0; i < records.size(); ++i) episodes[records[i].episode_id].push_back(i);
  for (auto& [id, idx] : episodes) {
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return records[a].t < records[b].t; });
    std::vector<double> d;
    d.reserve(idx.size() + 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (records[idx[k]].t != static_cast<int>(k)) {
        throw FormatError("label: episode " + std::to_string(id) + " is missing steps");
      }
      d.push_back(records[idx[k]].distance);
    }
    d.push_back(records[idx.back()].final_distance);
    const auto raw = raw_progress(d, cfg.progress_horizon);
    const auto r = normalize_rewards(raw, cfg);
    const auto rtg = return_to_go(r, cfg);
    for (std::size_t k = 0; k < idx.size(); ++k) records[idx[k]].reward = RewardLabel{raw[k], r[k], rtg[k]};
  }
}

}  // namespace navlab
