#include "navlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "navlab/common.hpp"

namespace navlab {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void PolicyConfig::validate() const {
  if (categories < 1) throw ConfigError("policy: categories must be >= 1");
  if (patch < 1 || map_size % patch != 0) {
    throw ConfigError("policy: map size " + std::to_string(map_size) + " is not divisible by patch " +
                      std::to_string(patch));
  }
  if (width < 1 || queries < 1 || rays < 1 || max_range < 1 || goal_dim < 1 || hidden < 1) {
    throw ConfigError("policy: sizes must be positive");
  }
}

nlohmann::json PolicyConfig::to_json() const {
  return {{"categories", categories}, {"map_size", map_size}, {"patch", patch},   {"width", width},
          {"queries", queries},       {"rays", rays},         {"max_range", max_range},
          {"goal_dim", goal_dim},     {"hidden", hidden}};
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& j) {
  PolicyConfig c;
  try {
    c.categories = j.at("categories").get<int>();
    c.map_size = j.at("map_size").get<int>();
    c.patch = j.at("patch").get<int>();
    c.width = j.at("width").get<int>();
    c.queries = j.at("queries").get<int>();
    c.rays = j.at("rays").get<int>();
    c.max_range = j.at("max_range").get<int>();
    c.goal_dim = j.at("goal_dim").get<int>();
    c.hidden = j.at("hidden").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("policy config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor map_patches(const SemanticMap& ego, const PolicyConfig& cfg) {
  if (ego.size() != cfg.map_size || ego.categories() != cfg.categories) {
    throw ConfigError("policy: egocentric map shape does not match the policy config");
  }
  const int side = cfg.patches_per_side();
  const int p = cfg.patch;
  Tensor out(static_cast<std::size_t>(cfg.map_tokens()), static_cast<std::size_t>(cfg.patch_features()));
  for (int pr = 0; pr < side; ++pr) {
    for (int pc = 0; pc < side; ++pc) {
      const auto row = static_cast<std::size_t>(pr * side + pc);
      std::size_t col = 0;
      for (int ch = 0; ch < cfg.channels(); ++ch) {
        for (int y = 0; y < p; ++y) {
          for (int x = 0; x < p; ++x, ++col) {
            if (ego.get(ch, pc * p + x, pr * p + y)) out(row, col) = 1.0;
          }
        }
      }
    }
  }
  return out;
}

Tensor frame_features(std::span<const Observation> frames, const PolicyConfig& cfg) {
  const auto stride = static_cast<std::size_t>(2 + cfg.categories);
  Tensor out(frames.size(), static_cast<std::size_t>(cfg.frame_features()));
  const double range = cfg.max_range;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& o = frames[f];
    if (o.depth.size() != static_cast<std::size_t>(cfg.rays)) throw ConfigError("policy: ray count mismatch");
    for (std::size_t r = 0; r < o.depth.size(); ++r) {
      const std::size_t base = r * stride;
      out(f, base) = o.depth[r] / range;
      const int cat = o.hits[r].category;
      out(f, base + 1) = cat > 0 ? o.hits[r].distance / range : 1.0;
      if (cat > 0 && cat <= cfg.categories) out(f, base + 1 + static_cast<std::size_t>(cat)) = 1.0;
    }
  }
  return out;
}

Tensor depth_targets(std::span<const Observation> frames, const PolicyConfig& cfg) {
  Tensor out(frames.size(), static_cast<std::size_t>(cfg.rays));
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t r = 0; r < out.cols(); ++r) out(f, r) = frames[f].depth.at(r) / cfg.max_range;
  }
  return out;
}

namespace {

Tensor uniform(Rng& rng, std::size_t rows, std::size_t cols, double a) {
  Tensor t(rows, cols);
  for (auto& v : t.data()) v = (2.0 * uniform01(rng) - 1.0) * a;
  return t;
}

Tensor xavier(Rng& rng, std::size_t in, std::size_t out) {
  return uniform(rng, in, out, std::sqrt(6.0 / static_cast<double>(in + out)));
}

void add_affine(nn::ParamStore& ps, const char* group, const std::string& suffix, Rng& rng, std::size_t in,
                std::size_t out) {
  ps.add(group, "w" + suffix, xavier(rng, in, out));
  ps.add(group, "b" + suffix, Tensor(1, out));
}

void add_attention(nn::ParamStore& ps, const char* group, Rng& rng, std::size_t d) {
  add_affine(ps, group, "q", rng, d, d);
  ps.add(group, "wk", xavier(rng, d, d));
  add_affine(ps, group, "v", rng, d, d);
}

nn::AttentionParams attention_ids(const nn::ParamStore& ps, const char* group) {
  return {ps.find(group, "wq"), ps.find(group, "bq"), ps.find(group, "wk"), ps.find(group, "wv"),
          ps.find(group, "bv")};
}

}  // namespace

Policy::Policy(const PolicyConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const auto d = static_cast<std::size_t>(cfg_.width);
  const auto nm = static_cast<std::size_t>(cfg_.map_tokens());
  auto rng_for = [seed](const char* group) { return Rng(derive_seed(seed, group)); };

  {
    auto rng = rng_for(groups::kMapEncoder);
    params_.add_group(groups::kMapEncoder);
    add_affine(params_, groups::kMapEncoder, "", rng, static_cast<std::size_t>(cfg_.patch_features()), d);
    params_.add(groups::kMapEncoder, "pos", uniform(rng, nm, d, 0.1));
  }
  {
    auto rng = rng_for(groups::kObsEncoder);
    params_.add_group(groups::kObsEncoder);
    add_affine(params_, groups::kObsEncoder, "", rng, static_cast<std::size_t>(cfg_.frame_features()), d);
  }
  {
    auto rng = rng_for(groups::kHistoryPooler);
    params_.add_group(groups::kHistoryPooler);
    params_.add(groups::kHistoryPooler, "queries", uniform(rng, static_cast<std::size_t>(cfg_.queries), d, 0.5));
    params_.add(groups::kHistoryPooler, "temporal", uniform(rng, kHistoryFrames - 1, d, 0.1));
    add_attention(params_, groups::kHistoryPooler, rng, d);
  }
  {
    auto rng = rng_for(groups::kFusion);
    params_.add_group(groups::kFusion);
    add_attention(params_, groups::kFusion, rng, d);
  }
  {
    auto rng = rng_for(groups::kProjector);
    params_.add_group(groups::kProjector);
    add_affine(params_, groups::kProjector, "", rng, d, d);
  }
  {
    auto rng = rng_for(groups::kTrunk);
    params_.add_group(groups::kTrunk);
    const auto h = static_cast<std::size_t>(cfg_.hidden);
    const auto in = static_cast<std::size_t>(cfg_.obs_tokens()) * d + static_cast<std::size_t>(cfg_.goal_dim);
    add_affine(params_, groups::kTrunk, "1", rng, in, h);
    add_affine(params_, groups::kTrunk, "2", rng, h, h);
  }
  {
    // Wide uniform init keeps distinct goals distinct.
    auto rng = rng_for(groups::kGoalEmbedding);
    params_.add_group(groups::kGoalEmbedding);
    params_.add(groups::kGoalEmbedding, "table",
                uniform(rng, static_cast<std::size_t>(cfg_.categories), static_cast<std::size_t>(cfg_.goal_dim), 1.0));
    params_.add(groups::kGoalEmbedding, "query",
                uniform(rng, static_cast<std::size_t>(cfg_.categories), d, 0.5));
  }
  {
    auto rng = rng_for(groups::kActionHead);
    params_.add_group(groups::kActionHead);
    add_affine(params_, groups::kActionHead, "", rng, static_cast<std::size_t>(cfg_.hidden),
               static_cast<std::size_t>(kActionHorizon * kNumActions));
  }
}

void Policy::add_reward_head(std::uint64_t seed) {
  if (has_reward_head()) return;
  Rng rng(derive_seed(seed, groups::kRewardHead));
  params_.add_group(groups::kRewardHead);
  add_affine(params_, groups::kRewardHead, "", rng, static_cast<std::size_t>(cfg_.hidden), 1);
}

void Policy::add_obs_decoder(std::uint64_t seed) {
  if (params_.has_group(groups::kObsDecoder)) return;
  Rng rng(derive_seed(seed, groups::kObsDecoder));
  params_.add_group(groups::kObsDecoder);
  add_affine(params_, groups::kObsDecoder, "", rng, static_cast<std::size_t>(cfg_.width),
             static_cast<std::size_t>(cfg_.rays));
}

void Policy::add_stage1_heads(std::uint64_t seed) {
  if (params_.has_group(groups::kStage1Heads)) return;
  Rng rng(derive_seed(seed, groups::kStage1Heads));
  params_.add_group(groups::kStage1Heads);
  const auto in = static_cast<std::size_t>(cfg_.hidden + cfg_.map_tokens() * cfg_.width);
  add_affine(params_, groups::kStage1Heads, "_sector", rng, in, static_cast<std::size_t>(kSectors * (cfg_.categories + 1)));
  add_affine(params_, groups::kStage1Heads, "_bucket", rng, in, static_cast<std::size_t>(kSectors * kFreeBuckets));
  add_affine(params_, groups::kStage1Heads, "_action", rng, in, static_cast<std::size_t>(kNumActions));
}

void Policy::drop_group(const char* name) {
  if (params_.has_group(name)) params_.remove_group(name);
}

void Policy::apply_freeze(int stage) {
  std::vector<std::string> trainable;
  switch (stage) {
    case 0:
      trainable = {groups::kObsEncoder, groups::kObsDecoder};
      break;
    case 1:
      trainable = {groups::kMapEncoder, groups::kProjector, groups::kTrunk, groups::kStage1Heads};
      break;
    case 2:
    case 3:
      trainable = {groups::kHistoryPooler, groups::kFusion,      groups::kProjector, groups::kTrunk,
                   groups::kGoalEmbedding, groups::kActionHead, groups::kRewardHead};
      break;
    default:
      throw ConfigError("policy: unknown stage " + std::to_string(stage));
  }
  for (auto& g : params_.groups()) {
    g.frozen = std::find(trainable.begin(), trainable.end(), g.name) == trainable.end();
  }
}

Var Policy::affine(Graph& g, Var x, const char* group, const std::string& suffix) const {
  return g.affine(x, g.param(group, "w" + suffix), g.param(group, "b" + suffix));
}

Var Policy::encode_map(Graph& g, Var patches) const {
  return g.add(affine(g, patches, groups::kMapEncoder, ""), g.param(groups::kMapEncoder, "pos"));
}

Var Policy::encode_frames(Graph& g, Var features) const { return g.tanh(affine(g, features, groups::kObsEncoder, "")); }

FeatureBundle Policy::forward_tokens(Graph& g, Var map_tokens, Var frame_tokens, int goal) const {
  if (goal < 1 || goal > cfg_.categories) throw ConfigError("policy: goal id out of range");
  FeatureBundle f;
  f.map_tokens = map_tokens;
  f.frame_tokens = frame_tokens;

  const Var history = g.add(g.gather_rows(frame_tokens, {0, 1, 2}), g.param(groups::kHistoryPooler, "temporal"));
  const Var current = g.gather_rows(frame_tokens, {3});
  const Var pooled = nn::cross_attention(g, g.param(groups::kHistoryPooler, "queries"), history, history,
                                         attention_ids(params_, groups::kHistoryPooler));
  const std::array<Var, 2> parts{pooled, current};
  f.obs_tokens = g.concat_rows(parts);

  // Goal-shifted queries, so the map is read with the target in mind.
  const auto goal_row = std::vector<std::size_t>{static_cast<std::size_t>(goal - 1)};
  const Var fusion_queries = g.add_row(f.obs_tokens, g.gather_rows(g.param(groups::kGoalEmbedding, "query"), goal_row));
  f.fused = nn::cross_attention(g, fusion_queries, map_tokens, map_tokens, attention_ids(params_, groups::kFusion));
  f.projected = g.add(affine(g, f.fused, groups::kProjector, ""), f.obs_tokens);

  const Var goal_vec = g.gather_rows(g.param(groups::kGoalEmbedding, "table"), {static_cast<std::size_t>(goal - 1)});
  // Flattened, not pooled: which token carried what matters to the heads.
  const Var flat = g.reshape(f.projected, 1, static_cast<std::size_t>(cfg_.obs_tokens() * cfg_.width));
  const Var h0 = g.concat_cols(flat, goal_vec);
  const Var h1 = g.tanh(affine(g, h0, groups::kTrunk, "1"));
  f.trunk = g.tanh(affine(g, h1, groups::kTrunk, "2"));

  f.action_logits = g.reshape(affine(g, f.trunk, groups::kActionHead, ""), kActionHorizon, kNumActions);
  if (has_reward_head()) f.rtg = affine(g, f.trunk, groups::kRewardHead, "");
  return f;
}

FeatureBundle Policy::forward(Graph& g, const SemanticMap& ego, std::span<const Observation> frames, int goal) const {
  if (frames.size() != static_cast<std::size_t>(kHistoryFrames)) {
    throw ConfigError("policy: expected exactly 4 observation frames");
  }
  const Var map_tokens = encode_map(g, g.input(map_patches(ego, cfg_), "map_patches"));
  const Var frame_tokens = encode_frames(g, g.input(frame_features(frames, cfg_), "frames"));
  return forward_tokens(g, map_tokens, frame_tokens, goal);
}

Stage1Logits Policy::stage1_heads(Graph& g, const FeatureBundle& f) const {
  const auto flat = static_cast<std::size_t>(cfg_.map_tokens() * cfg_.width);
  const Var in = g.concat_cols(f.trunk, g.reshape(f.map_tokens, 1, flat));
  Stage1Logits out;
  out.sectors = g.reshape(affine(g, in, groups::kStage1Heads, "_sector"), kSectors, cfg_.categories + 1);
  out.buckets = g.reshape(affine(g, in, groups::kStage1Heads, "_bucket"), kSectors, kFreeBuckets);
  out.action = affine(g, in, groups::kStage1Heads, "_action");
  return out;
}

Var Policy::obs_decoder(Graph& g, Var frame_tokens) const {
  return affine(g, frame_tokens, groups::kObsDecoder, "");
}

Prediction Policy::predict(const SemanticMap& ego, std::span<const Observation> frames, int goal) const {
  Graph g(&params_, nullptr);
  const auto f = forward(g, ego, frames, goal);
  Prediction p;
  p.logits = g.value(f.action_logits);
  if (f.rtg) p.rtg = g.scalar(*f.rtg);
  return p;
}

void Policy::save(const std::string& path, const std::vector<int>& stages, const std::string& config_hash) const {
  params_.save(path);
  nlohmann::json manifest;
  manifest["format"] = "MUVP";
  manifest["stages"] = stages;
  manifest["config_hash"] = config_hash;
  manifest["policy"] = cfg_.to_json();
  std::vector<std::string> names;
  for (const auto& g : params_.groups()) names.push_back(g.name);
  manifest["groups"] = names;
  io::write_file(path + ".json", manifest.dump(2) + "\n");
}

CheckpointManifest read_manifest(const std::string& ckpt_path) {
  const auto text = io::read_file(ckpt_path + ".json");
  try {
    const auto j = nlohmann::json::parse(text);
    CheckpointManifest m;
    m.stages = j.at("stages").get<std::vector<int>>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.policy = PolicyConfig::from_json(j.at("policy"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(ckpt_path + ".json: " + e.what());
  }
}

Policy Policy::load(const std::string& path) {
  const auto manifest = read_manifest(path);
  Policy reference(manifest.policy, 0);
  reference.add_reward_head(0);
  reference.add_obs_decoder(0);
  reference.add_stage1_heads(0);

  Policy p;
  p.cfg_ = manifest.policy;
  p.params_ = nn::ParamStore::load(path);
  for (const auto& g : p.params_.groups()) {
    if (!reference.params_.has_group(g.name)) throw FormatError(path + ": unexpected parameter group " + g.name);
    const auto& ref = reference.params_.group(g.name);
    if (ref.params.size() != g.params.size()) throw FormatError(path + ": group " + g.name + " has wrong tensor count");
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      if (g.params[i].name != ref.params[i].name || g.params[i].value.shape() != ref.params[i].value.shape()) {
        throw FormatError(path + ": tensor " + g.name + "/" + g.params[i].name + " does not match the policy config");
      }
    }
  }
  for (const char* required : {groups::kMapEncoder, groups::kObsEncoder, groups::kHistoryPooler, groups::kFusion,
                               groups::kProjector, groups::kTrunk, groups::kGoalEmbedding, groups::kActionHead}) {
    if (!p.params_.has_group(required)) throw FormatError(path + ": missing parameter group " + required);
  }
  return p;
}

std::array<Action, kActionHorizon> select_actions(const Tensor& logits, DecodeMode mode, std::uint64_t seed) {
  if (logits.rows() != kActionHorizon || logits.cols() != kNumActions) throw ConfigError("select_actions: bad shape");
  if (!logits.all_finite()) throw NumericError("select_actions: non-finite logits");
  std::array<Action, kActionHorizon> out{};
  Rng rng(seed);
  for (std::size_t r = 0; r < kActionHorizon; ++r) {
    std::size_t pick = 0;
    if (mode == DecodeMode::Greedy) {
      for (std::size_t j = 1; j < kNumActions; ++j) {
        if (logits(r, j) > logits(r, pick)) pick = j;
      }
    } else {
      double mx = logits(r, 0);
      for (std::size_t j = 1; j < kNumActions; ++j) mx = std::max(mx, logits(r, j));
      std::array<double, kNumActions> w{};
      double z = 0.0;
      for (std::size_t j = 0; j < kNumActions; ++j) z += w[j] = std::exp(logits(r, j) - mx);
      double u = uniform01(rng) * z;
      pick = kNumActions - 1;
      for (std::size_t j = 0; j < kNumActions; ++j) {
        if (u < w[j]) {
          pick = j;
          break;
        }
        u -= w[j];
      }
    }
    out[r] = static_cast<Action>(pick);
  }
  return out;
}

}  // namespace navlab
