#include "navlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "navlab/common.hpp"

namespace navlab {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: bad value '" + text + "' for " + key);
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::string key;  // "section.name"
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

Field int_field(std::string key, int& ref) {
  return {key, [&ref] { return std::to_string(ref); },
          [&ref, key](const std::string& s) { ref = parse_number<int>(key, s); }};
}

Field double_field(std::string key, double& ref) {
  return {key, [&ref] { return format_double(ref); },
          [&ref, key](const std::string& s) { ref = parse_number<double>(key, s); }};
}

std::vector<Field> fields(RunConfig& c) {
  std::vector<Field> f;
  f.push_back({"run.seed", [&c] { return std::to_string(c.seed); },
               [&c](const std::string& s) { c.seed = parse_number<std::uint64_t>("run.seed", s); }});

  f.push_back(int_field("world.width", c.world.width));
  f.push_back(int_field("world.height", c.world.height));
  f.push_back(int_field("world.categories", c.world.categories));
  f.push_back(int_field("world.instances", c.world.instances_per_category));
  f.push_back(int_field("world.instance_cells", c.world.instance_cells));
  f.push_back(double_field("world.clutter", c.world.clutter_density));

  f.push_back(int_field("sensor.rays", c.episode.sensor.rays));
  f.push_back(double_field("sensor.fov_deg", c.episode.sensor.fov_deg));
  f.push_back(int_field("sensor.max_range", c.episode.sensor.max_range));

  f.push_back(int_field("map.window", c.policy.map_size));
  f.push_back(int_field("map.patch", c.policy.patch));

  f.push_back(int_field("policy.width", c.policy.width));
  f.push_back(int_field("policy.queries", c.policy.queries));
  f.push_back(int_field("policy.goal_dim", c.policy.goal_dim));
  f.push_back(int_field("policy.hidden", c.policy.hidden));

  f.push_back({"collect.mix",
               [&c] {
                 return std::to_string(c.mix.expert) + ":" + std::to_string(c.mix.frontier) + ":" +
                        std::to_string(c.mix.noisy);
               },
               [&c](const std::string& s) { c.mix = parse_mix(s); }});
  f.push_back(int_field("collect.budget", c.episode.budget));
  f.push_back(int_field("collect.min_spawn_distance", c.episode.min_spawn_distance));
  f.push_back(double_field("collect.noisy_epsilon", c.episode.noisy_epsilon));

  f.push_back(double_field("reward.gamma", c.reward.gamma));
  f.push_back(int_field("reward.window", c.reward.window));
  f.push_back(int_field("reward.progress_horizon", c.reward.progress_horizon));
  f.push_back(double_field("reward.sigma_floor", c.reward.sigma_floor));
  f.push_back({"reward.weight", [&c] { return std::string(to_string(c.reward.weight_kind)); },
               [&c](const std::string& s) { c.reward.weight_kind = parse_weight_kind(s); }});
  f.push_back({"reward.type", [&c] { return std::string(to_string(c.reward.reward_kind)); },
               [&c](const std::string& s) { c.reward.reward_kind = parse_reward_kind(s); }});

  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    auto& s = c.stages[i];
    const std::string sec = "stage" + std::to_string(i) + ".";
    f.push_back(int_field(sec + "epochs", s.epochs));
    f.push_back(int_field(sec + "batch", s.batch_size));
    f.push_back(double_field(sec + "lr", s.lr));
    f.push_back({sec + "schedule", [&s] { return std::string(to_string(s.schedule)); },
                 [&s](const std::string& v) { s.schedule = parse_lr_schedule(v); }});
    f.push_back(double_field(sec + "lambda", s.lambda));
    f.push_back(double_field(sec + "tau", s.tau));
    f.push_back({sec + "expectile_sign", [&s] { return std::string(to_string(s.expectile_sign)); },
                 [&s](const std::string& v) { s.expectile_sign = parse_expectile_sign(v); }});
    f.push_back(double_field(sec + "stop_factor", s.stop_factor));
    f.push_back(double_field(sec + "grad_clip", s.grad_clip));
  }

  f.push_back(int_field("eval.goals", c.eval_goals));
  f.push_back({"eval.decode", [&c] { return std::string(c.eval_decode == DecodeMode::Greedy ? "greedy" : "sample"); },
               [&c](const std::string& s) {
                 if (s == "greedy") {
                   c.eval_decode = DecodeMode::Greedy;
                 } else if (s == "sample") {
                   c.eval_decode = DecodeMode::Sample;
                 } else {
                   throw ConfigError("config: eval.decode must be greedy or sample");
                 }
               }});
  return f;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& ini_text) {
  RunConfig c;
  boost::property_tree::ptree tree;
  std::istringstream is(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  auto table = fields(c);
  for (const auto& [section, keys] : tree) {
    if (keys.empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : keys) {
      const std::string full = section + "." + key;
      auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == full; });
      if (it == table.end()) throw ConfigError("config: unknown key " + full);
      it->set(value.data());
    }
  }
  for (auto& s : c.stages) s.reward = c.reward;
  c.policy.categories = c.world.categories;
  c.policy.rays = c.episode.sensor.rays;
  c.policy.max_range = c.episode.sensor.max_range;
  c.policy.validate();
  c.reward.validate();
  for (const auto& s : c.stages) s.validate();
  if (c.eval_goals < 1) throw ConfigError("config: eval.goals must be >= 1");
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  RunConfig c = path.empty() ? parse("") : parse(io::read_file(path));
  apply_seed_override(c);
  return c;
}

void apply_seed_override(RunConfig& cfg) {
  const char* env = std::getenv("NAVLAB_SEED");
  if (env == nullptr || *env == '\0') return;
  cfg.seed = parse_number<std::uint64_t>("NAVLAB_SEED", env);
}

StageConfig RunConfig::stage(int s) const {
  if (s < 0 || s > 3) throw ConfigError("stage must be 0..3");
  StageConfig out = stages[static_cast<std::size_t>(s)];
  out.stage = s;
  out.reward = reward;
  out.seed = derive_seed(derive_seed(seed, "train"), static_cast<std::uint64_t>(s));
  return out;
}

std::string RunConfig::to_ini() const {
  RunConfig copy = *this;
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields(copy)) {
    const auto dot = f.key.find('.');
    const auto sec = f.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << f.key.substr(dot + 1) << " = " << f.get() << '\n';
  }
  return os.str();
}

std::string RunConfig::hash() const { return sha256_hex(std::string_view(to_ini())); }

}  // namespace navlab
