#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "navlab/demogen.hpp"
#include "navlab/mapper.hpp"
#include "navlab/nnet/graph.hpp"

namespace navlab {

struct PolicyConfig {
  int categories = 6;
  int map_size = kDefaultWindow;
  int patch = 11;
  int width = 32;  // d = d_v
  int queries = 4;
  int rays = 15;
  int max_range = 10;
  int goal_dim = 16;
  int hidden = 64;

  int channels() const { return categories + 2; }
  int patches_per_side() const { return map_size / patch; }
  int map_tokens() const { return patches_per_side() * patches_per_side(); }
  int patch_features() const { return patch * patch * channels(); }
  int frame_features() const { return rays * (2 + categories); }
  int obs_tokens() const { return queries + 1; }

  void validate() const;
  nlohmann::json to_json() const;
  static PolicyConfig from_json(const nlohmann::json& j);
};

namespace groups {
inline constexpr const char* kMapEncoder = "map_encoder";
inline constexpr const char* kObsEncoder = "obs_encoder";
inline constexpr const char* kHistoryPooler = "history_pooler";
inline constexpr const char* kFusion = "fusion";
inline constexpr const char* kProjector = "projector";
inline constexpr const char* kTrunk = "trunk";
inline constexpr const char* kGoalEmbedding = "goal_embedding";
inline constexpr const char* kActionHead = "action_head";
inline constexpr const char* kRewardHead = "reward_head";
// Temporary heads; never part of a finished checkpoint.
inline constexpr const char* kObsDecoder = "obs_decoder";
inline constexpr const char* kStage1Heads = "stage1_heads";
}  // namespace groups

/// Non-overlapping patches of an egocentric map, one flattened row per patch
/// (row-major patch order; within a patch channel-major, then row, column).
nn::Tensor map_patches(const SemanticMap& ego, const PolicyConfig& cfg);

/// One row per frame: per ray depth/range, hit distance/range (1 without a
/// hit), then a one-hot over the C categories (all zero without a hit).
nn::Tensor frame_features(std::span<const Observation> frames, const PolicyConfig& cfg);

/// Depth/range per ray for each frame; the Stage-0 reconstruction target.
nn::Tensor depth_targets(std::span<const Observation> frames, const PolicyConfig& cfg);

/// Vars of one forward pass.
struct FeatureBundle {
  nn::Var map_tokens;    // n_m x d
  nn::Var frame_tokens;  // 4 x d, oldest first
  nn::Var obs_tokens;    // n_o x d
  nn::Var fused;         // n_o x d
  nn::Var projected;     // n_o x d
  nn::Var trunk;         // 1 x hidden
  nn::Var action_logits; // 4 x V
  std::optional<nn::Var> rtg;
};

struct Stage1Logits {
  nn::Var sectors;  // 8 x (C+1)
  nn::Var buckets;  // 8 x 4
  nn::Var action;   // 1 x V
};

struct Prediction {
  nn::Tensor logits;  // 4 x V
  std::optional<double> rtg;
};

enum class DecodeMode { Greedy, Sample };

class Policy {
 public:
  Policy() = default;
  /// All permanent groups except the reward head, seeded initialisation.
  Policy(const PolicyConfig& cfg, std::uint64_t seed);

  const PolicyConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  bool has_reward_head() const { return params_.has_group(groups::kRewardHead); }
  void add_reward_head(std::uint64_t seed);
  void add_obs_decoder(std::uint64_t seed);
  void add_stage1_heads(std::uint64_t seed);
  void drop_group(const char* name);

  /// Sets frozen flags per the stage schedule (0 = observation-encoder
  /// pretraining, 1 = map understanding, 2 = BC, 3 = reward amplification).
  void apply_freeze(int stage);

  nn::Var encode_map(nn::Graph& g, nn::Var patches) const;
  nn::Var encode_frames(nn::Graph& g, nn::Var features) const;
  /// Everything downstream of the two encoders.
  FeatureBundle forward_tokens(nn::Graph& g, nn::Var map_tokens, nn::Var frame_tokens, int goal) const;
  FeatureBundle forward(nn::Graph& g, const SemanticMap& ego, std::span<const Observation> frames, int goal) const;
  Stage1Logits stage1_heads(nn::Graph& g, const FeatureBundle& f) const;
  nn::Var obs_decoder(nn::Graph& g, nn::Var frame_tokens) const;

  Prediction predict(const SemanticMap& ego, std::span<const Observation> frames, int goal) const;

  /// MUVP parameters plus `<path>.json` manifest (stages, config hash, arch).
  void save(const std::string& path, const std::vector<int>& stages, const std::string& config_hash) const;
  static Policy load(const std::string& path);

 private:
  nn::Var affine(nn::Graph& g, nn::Var x, const char* group, const std::string& prefix) const;

  PolicyConfig cfg_;
  nn::ParamStore params_;
};

struct CheckpointManifest {
  std::vector<int> stages;
  std::string config_hash;
  PolicyConfig policy;
};

CheckpointManifest read_manifest(const std::string& ckpt_path);

std::array<Action, kActionHorizon> select_actions(const nn::Tensor& logits, DecodeMode mode, std::uint64_t seed = 0);

}  // namespace navlab
