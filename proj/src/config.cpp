#include "lgtd/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lgtd {

namespace {

using json = nlohmann::json;

struct Field {
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

[[noreturn]] void type_error(const std::string& key, const char* want, const json& v) {
  throw std::invalid_argument("config key " + key + " expects " + want + ", got " + v.dump());
}

int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) type_error(key, "an integer", v);
  return v.get<int>();
}

std::uint64_t as_u64(const std::string& key, const json& v) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    type_error(key, "a non-negative integer", v);
  }
  return v.get<std::uint64_t>();
}

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) type_error(key, "a number", v);
  return v.get<double>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) type_error(key, "true or false", v);
  return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) type_error(key, "a string", v);
  return v.get<std::string>();
}

#define INT_FIELD(key, member) \
  {key, {[](const RunConfig& c) { return json(c.member); }, [](RunConfig& c, const json& v) { c.member = as_int(key, v); }}}
#define DOUBLE_FIELD(key, member)                             \
  {key,                                                       \
   {[](const RunConfig& c) { return json(c.member); },        \
    [](RunConfig& c, const json& v) { c.member = as_double(key, v); }}}
#define BOOL_FIELD(key, member) \
  {key, {[](const RunConfig& c) { return json(c.member); }, [](RunConfig& c, const json& v) { c.member = as_bool(key, v); }}}
#define ENUM_FIELD(key, member, parse)                                  \
  {key,                                                                 \
   {[](const RunConfig& c) { return json(to_string(c.member)); },       \
    [](RunConfig& c, const json& v) {                                   \
      try {                                                             \
        c.member = parse(as_string(key, v));                            \
      } catch (const std::invalid_argument& e) {                        \
        throw std::invalid_argument(std::string("config key ") + key + ": " + e.what()); \
      }                                                                 \
    }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      INT_FIELD("model.halfFrames", model.half_frames),
      INT_FIELD("model.channels", model.channels),
      INT_FIELD("model.scale", model.scale),
      INT_FIELD("model.extractorBlocks", model.extractor_blocks),
      INT_FIELD("model.lsabBlocks", model.lsab.num_blocks),
      INT_FIELD("model.msaHeads", model.lsab.heads),
      INT_FIELD("model.windowSize", model.lsab.window),
      INT_FIELD("model.caReduction", model.lsab.ca_reduction),
      DOUBLE_FIELD("model.alpha", model.alpha),
      DOUBLE_FIELD("model.beta", model.beta),
      DOUBLE_FIELD("model.maxDisplacement", model.max_displacement),
      BOOL_FIELD("model.useSTDM", model.use_stdm),
      BOOL_FIELD("model.useLTDM", model.use_ltdm),
      BOOL_FIELD("model.useDCU", model.use_dcu),
      ENUM_FIELD("model.stdmMode", model.stdm_mode, parse_fusion_mode),
      ENUM_FIELD("model.ltdmMode", model.ltdm_mode, parse_fusion_mode),
      ENUM_FIELD("model.ltdmDirection", model.ltdm_direction, parse_direction),
      ENUM_FIELD("model.reconMode", model.recon_mode, parse_recon_mode),
      BOOL_FIELD("model.globalSkip", model.global_skip),
      INT_FIELD("train.batchSize", train.batch_size),
      INT_FIELD("train.patchSize", train.patch_size),
      DOUBLE_FIELD("train.lrInit", train.lr_init),
      INT_FIELD("train.halveEvery", train.halve_every),
      INT_FIELD("train.epochs", train.epochs),
      DOUBLE_FIELD("train.adamBeta1", train.adam_beta1),
      DOUBLE_FIELD("train.adamBeta2", train.adam_beta2),
      DOUBLE_FIELD("train.adamEps", train.adam_eps),
      {"train.seed",
       {[](const RunConfig& c) { return json(c.train.seed); },
        [](RunConfig& c, const json& v) { c.train.seed = as_u64("train.seed", v); }}},
      INT_FIELD("train.iterations", train.iterations),
      INT_FIELD("train.itersPerEpoch", train.iters_per_epoch),
      INT_FIELD("train.valEvery", train.val_every),
      INT_FIELD("train.valSamples", train.val_samples),
      ENUM_FIELD("eval.channel", eval.channel, parse_channel),
      INT_FIELD("eval.borderCrop", eval.border_crop),
      DOUBLE_FIELD("eval.pixelScale", eval.pixel_scale),
  };
  return table;
}

#undef INT_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
#undef ENUM_FIELD

const Field& field(const std::string& key) {
  const auto& t = fields();
  auto it = t.find(key);
  if (it == t.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : fields()) keys.push_back(k);
  return keys;
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return field(key).get(cfg).dump(); }

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded() || v.is_object() || v.is_array()) v = text;
  field(key).set(cfg, v);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' must look like key=value");
  }
  set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void merge_config_json(RunConfig& cfg, const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("malformed config: top level must be an object");
  for (const auto& [k, v] : doc.items()) {
    if (v.is_object()) {
      for (const auto& [sub, sv] : v.items()) field(k + "." + sub).set(cfg, sv);
    } else {
      field(k).set(cfg, v);
    }
  }
}

RunConfig config_from_json(const std::string& text) {
  RunConfig cfg;
  merge_config_json(cfg, text);
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json doc = json::object();
  for (const auto& [key, f] : fields()) {
    const auto dot = key.find('.');
    doc[key.substr(0, dot)][key.substr(dot + 1)] = f.get(cfg);
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> preset_names() { return {"default", "micro", "toy"}; }

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "default") return c;
  if (name == "micro") {
    c.model = micro_config();
    c.train.patch_size = 8;
    c.train.batch_size = 2;
    c.eval.border_crop = 0;
    return c;
  }
  if (name == "toy") {
    c.model.half_frames = 2;
    c.model.channels = 16;
    c.model.extractor_blocks = 1;
    c.model.lsab = {2, 4, 8, 4};
    c.train.patch_size = 24;
    c.train.batch_size = 4;
    c.train.lr_init = 5e-4;
    c.train.iterations = 2000;
    c.train.iters_per_epoch = 100;
    c.train.halve_every = 1000;  // no decay within the budget
    c.train.val_every = 20;      // once, at the end of the budget
    c.train.seed = 3;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (known: default, micro, toy)");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void write_config(const std::filesystem::path& path, const RunConfig& cfg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_to_json(cfg);
}

}  // namespace lgtd
