#include "vmr/config.hpp"

#include <algorithm>

namespace vmr {

using nlohmann::json;

namespace {

const char* const kAblationNames[] = {"no_disent", "no_indep", "no_recon", "no_loc_feat", "no_counterf", "no_interv"};

bool* ablation_slot(Ablations& a, const std::string& name) {
  if (name == "no_disent") return &a.no_disent;
  if (name == "no_indep") return &a.no_indep;
  if (name == "no_recon") return &a.no_recon;
  if (name == "no_loc_feat") return &a.no_loc_feat;
  if (name == "no_counterf") return &a.no_counterf;
  if (name == "no_interv") return &a.no_interv;
  return nullptr;
}

template <typename V>
void read(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

json ablations_to_json(const Ablations& a) {
  json out = json::array();
  Ablations copy = a;
  for (const char* name : kAblationNames) {
    if (*ablation_slot(copy, name)) out.push_back(name);
  }
  return out;
}

Ablations ablations_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("ablations must be a list of flag names");
  Ablations a;
  for (const auto& item : j) {
    if (!item.is_string()) throw ConfigError("ablation flags must be strings");
    bool* slot = ablation_slot(a, item.get<std::string>());
    if (!slot) throw ConfigError("unknown ablation flag '" + item.get<std::string>() + "'");
    *slot = true;
  }
  return a;
}

std::string ablation_label(const Ablations& a) {
  std::string out;
  for (const auto& name : ablations_to_json(a)) out += (out.empty() ? "" : "+") + name.get<std::string>();
  return out;
}

json to_json(const TrainConfig& c) {
  const ModelConfig& m = c.model;
  json stack = json::array();
  for (const auto& l : m.conv_stack) stack.push_back({{"kernel", l.kernel}, {"relu", l.relu}});
  return {{"d", m.d},
          {"num_clips", m.num_clips},
          {"feature_dim", m.feature_dim},
          {"embed_dim", m.embed_dim},
          {"lstm_layers", m.lstm_layers},
          {"head", to_string(m.head)},
          {"mode", to_string(m.mode)},
          {"prior_mode", to_string(m.prior)},
          {"ablations", ablations_to_json(m.ablations)},
          {"conv_stack", stack},
          {"cmi_bias", m.cmi_bias},
          {"max_period", m.max_period},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"t_min", c.labels.t_min},
          {"t_max", c.labels.t_max},
          {"dcor_scope", c.dcor_scope == DcorScope::kPositives ? "positives" : "all"},
          {"eval_batch", c.eval_batch}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& defaults) {
  const std::string where = "train";
  reject_unknown_keys(j,
                      {"d", "num_clips", "feature_dim", "embed_dim", "lstm_layers", "head", "mode", "prior_mode",
                       "ablations", "conv_stack", "cmi_bias", "max_period", "lambda1", "lambda2", "learning_rate",
                       "batch_size", "epochs", "seed", "t_min", "t_max", "dcor_scope", "eval_batch"},
                      where);
  TrainConfig c = defaults;
  ModelConfig& m = c.model;
  read(j, "d", m.d, where);
  read(j, "num_clips", m.num_clips, where);
  read(j, "feature_dim", m.feature_dim, where);
  read(j, "embed_dim", m.embed_dim, where);
  read(j, "lstm_layers", m.lstm_layers, where);
  read(j, "cmi_bias", m.cmi_bias, where);
  read(j, "max_period", m.max_period, where);
  read(j, "lambda1", c.lambda1, where);
  read(j, "lambda2", c.lambda2, where);
  read(j, "learning_rate", c.learning_rate, where);
  read(j, "batch_size", c.batch_size, where);
  read(j, "epochs", c.epochs, where);
  read(j, "seed", c.seed, where);
  read(j, "t_min", c.labels.t_min, where);
  read(j, "t_max", c.labels.t_max, where);
  read(j, "eval_batch", c.eval_batch, where);
  try {
    if (j.contains("head")) m.head = head_from_string(j.at("head").get<std::string>());
    if (j.contains("mode")) m.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("prior_mode")) m.prior = prior_from_string(j.at("prior_mode").get<std::string>());
    if (j.contains("dcor_scope")) {
      const auto s = j.at("dcor_scope").get<std::string>();
      if (s != "positives" && s != "all") throw ConfigError("dcor_scope must be 'positives' or 'all'");
      c.dcor_scope = s == "positives" ? DcorScope::kPositives : DcorScope::kAllCells;
    }
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (j.contains("ablations")) m.ablations = ablations_from_json(j.at("ablations"));
  if (j.contains("conv_stack")) {
    m.conv_stack.clear();
    for (const auto& l : j.at("conv_stack")) {
      reject_unknown_keys(l, {"kernel", "relu"}, "train.conv_stack");
      ConvLayerSpec spec;
      read(l, "kernel", spec.kernel, "train.conv_stack");
      read(l, "relu", spec.relu, "train.conv_stack");
      m.conv_stack.push_back(spec);
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

json to_json(const SyntheticConfig& c) {
  const BiasSpec& b = c.bias;
  json laws = json::object();
  for (const auto& [verb, law] : b.verb_laws) laws[verb] = {law.head, law.middle, law.tail};
  return {{"num_train", c.num_train},
          {"num_val", c.num_val},
          {"num_test", c.num_test},
          {"num_clips", c.num_clips},
          {"feature_dim", c.feature_dim},
          {"signal", c.signal},
          {"noise", c.noise},
          {"min_duration", c.min_duration},
          {"max_duration", c.max_duration},
          {"distractors", c.distractors},
          {"verbs", b.verbs},
          {"objects", b.objects},
          {"verb_laws", laws},
          {"head_bias", b.head_bias},
          {"head_end", b.head_end},
          {"tail_start", b.tail_start},
          {"length_mean", b.length_mean},
          {"length_std", b.length_std},
          {"min_length", b.min_length}};
}

SyntheticConfig synthetic_config_from_json(const json& j, const SyntheticConfig& defaults) {
  const std::string where = "data.synthetic";
  reject_unknown_keys(j,
                      {"num_train", "num_val", "num_test", "num_clips", "feature_dim", "signal", "noise",
                       "min_duration", "max_duration", "distractors", "verbs", "objects", "verb_laws", "head_bias",
                       "head_end", "tail_start", "length_mean", "length_std", "min_length"},
                      where);
  SyntheticConfig c = defaults;
  BiasSpec& b = c.bias;
  read(j, "num_train", c.num_train, where);
  read(j, "num_val", c.num_val, where);
  read(j, "num_test", c.num_test, where);
  read(j, "num_clips", c.num_clips, where);
  read(j, "feature_dim", c.feature_dim, where);
  read(j, "signal", c.signal, where);
  read(j, "noise", c.noise, where);
  read(j, "min_duration", c.min_duration, where);
  read(j, "max_duration", c.max_duration, where);
  read(j, "distractors", c.distractors, where);
  read(j, "verbs", b.verbs, where);
  read(j, "objects", b.objects, where);
  read(j, "head_bias", b.head_bias, where);
  read(j, "head_end", b.head_end, where);
  read(j, "tail_start", b.tail_start, where);
  read(j, "length_mean", b.length_mean, where);
  read(j, "length_std", b.length_std, where);
  read(j, "min_length", b.min_length, where);
  if (j.contains("verb_laws")) {
    b.verb_laws.clear();
    for (const auto& [verb, law] : j.at("verb_laws").items()) {
      if (!law.is_array() || law.size() != 3) throw ConfigError(where + ".verb_laws." + verb + " must be [head, middle, tail]");
      b.verb_laws[verb] = {law[0].get<double>(), law[1].get<double>(), law[2].get<double>()};
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

}  // namespace vmr
