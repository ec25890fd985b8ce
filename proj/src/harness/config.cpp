#include "metasched/harness/config.hpp"

#include <fstream>
#include <sstream>

#include "metasched/errors.hpp"

namespace metasched::harness {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key " + key + " expects a number, got '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key " + key + " expects an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key " + key + " expects true/false, got '" + v + "'");
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config: key " + key + " expects a list");
  return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (double d : to_double_list(key, v)) out.push_back(static_cast<int>(d));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

std::string join(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(SchedName s) {
  switch (s) {
    case SchedName::uniform: return "uniform";
    case SchedName::spl: return "spl";
    case SchedName::focal: return "focal";
    case SchedName::rank: return "rank";
    case SchedName::ats: return "ats";
    case SchedName::ats_random_phi: return "ats_random_phi";
    case SchedName::ats_reweight: return "ats_reweight";
  }
  return "?";
}

SchedName sched_from_string(const std::string& s) {
  if (s == "uniform") return SchedName::uniform;
  if (s == "spl") return SchedName::spl;
  if (s == "focal") return SchedName::focal;
  if (s == "rank") return SchedName::rank;
  if (s == "ats") return SchedName::ats;
  if (s == "ats_random_phi") return SchedName::ats_random_phi;
  if (s == "ats_reweight") return SchedName::ats_reweight;
  throw ConfigError("config: unknown scheduler '" + s + "'");
}

ExperimentConfig ExperimentConfig::defaults_for(Regime regime) {
  ExperimentConfig c;
  c.regime = regime;
  if (regime == Regime::budget) {
    c.noise_kind = taskgen::CorruptionKind::none;
    c.noise_task_fraction = 0.0;
    c.budget = 8;
    c.pool = 6;
    c.tau = 1.0;
  }
  return c;
}

void ExperimentConfig::apply_key(const std::string& key, const std::string& value) {
  if (key == "regime") {
    if (value == "noise") regime = Regime::noise;
    else if (value == "budget") regime = Regime::budget;
    else throw ConfigError("config: unknown regime '" + value + "'");
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(to_long(key, value));
  } else if (key == "out") {
    out = value;
  } else if (key == "task.family") {
    if (value == "sinusoid") family = taskgen::FamilyConfig::Family::sinusoid;
    else if (value == "cluster") family = taskgen::FamilyConfig::Family::cluster;
    else if (value == "blobs") family = taskgen::FamilyConfig::Family::blobs;
    else throw ConfigError("config: unknown task family '" + value + "'");
  } else if (key == "task.k_shot") {
    k_shot = static_cast<int>(to_long(key, value));
  } else if (key == "task.query_size") {
    query_size = static_cast<int>(to_long(key, value));
  } else if (key == "task.n_way") {
    n_way = static_cast<int>(to_long(key, value));
  } else if (key == "task.n_classes") {
    n_classes = static_cast<int>(to_long(key, value));
  } else if (key == "task.input_dim") {
    input_dim = static_cast<int>(to_long(key, value));
  } else if (key == "task.amp_min") {
    amp_min = to_double(key, value);
  } else if (key == "task.amp_max") {
    amp_max = to_double(key, value);
  } else if (key == "task.phase_min") {
    phase_min = to_double(key, value);
  } else if (key == "task.phase_max") {
    phase_max = to_double(key, value);
  } else if (key == "task.cluster_weights") {
    cluster_weights = to_double_list(key, value);
  } else if (key == "task.budget") {
    budget = static_cast<int>(to_long(key, value));
  } else if (key == "noise.kind") {
    if (value == "none") noise_kind = taskgen::CorruptionKind::none;
    else if (value == "flip") noise_kind = taskgen::CorruptionKind::flip;
    else if (value == "gaussian") noise_kind = taskgen::CorruptionKind::gaussian;
    else throw ConfigError("config: unknown noise kind '" + value + "'");
  } else if (key == "noise.task_fraction") {
    noise_task_fraction = to_double(key, value);
  } else if (key == "noise.flip_intensity") {
    flip_intensity = to_double(key, value);
  } else if (key == "noise.eta") {
    eta = to_double(key, value);
  } else if (key == "sched.name") {
    scheduler = sched_from_string(value);
  } else if (key == "sched.spl_growth") {
    spl_growth = to_double(key, value);
  } else if (key == "sched.spl_epoch") {
    spl_epoch = to_long(key, value);
  } else if (key == "sched.focal_gamma") {
    focal_gamma = to_double(key, value);
  } else if (key == "train.pool") {
    pool = static_cast<int>(to_long(key, value));
  } else if (key == "train.batch") {
    batch = static_cast<int>(to_long(key, value));
  } else if (key == "train.n_val") {
    n_val = static_cast<int>(to_long(key, value));
  } else if (key == "train.val_pool") {
    val_pool = static_cast<int>(to_long(key, value));
  } else if (key == "train.inner_steps") {
    inner_steps = static_cast<int>(to_long(key, value));
  } else if (key == "train.alpha") {
    alpha = to_double(key, value);
  } else if (key == "train.beta") {
    beta = to_double(key, value);
  } else if (key == "train.max_iterations") {
    max_iterations = to_long(key, value);
  } else if (key == "train.warm_start") {
    warm_start = static_cast<int>(to_long(key, value));
  } else if (key == "train.pretrain_clean") {
    pretrain_clean = static_cast<int>(to_long(key, value));
  } else if (key == "train.finetune_iters") {
    finetune_iters = static_cast<int>(to_long(key, value));
  } else if (key == "train.meta_grad") {
    if (value == "first_order") meta_grad = metalearn::MetaGradMode::first_order;
    else if (value == "exact_head") meta_grad = metalearn::MetaGradMode::exact_one_step_head;
    else throw ConfigError("config: unknown meta_grad mode '" + value + "'");
  } else if (key == "ats.gamma") {
    gamma = to_double(key, value);
  } else if (key == "ats.tau") {
    tau = to_double(key, value);
  } else if (key == "ats.encoder") {
    if (value == "bilstm") encoder = ats::EncoderKind::pool_bilstm;
    else if (value == "mlp") encoder = ats::EncoderKind::per_task_mlp;
    else throw ConfigError("config: unknown encoder '" + value + "'");
  } else if (key == "ats.use_loss") {
    use_loss = to_bool(key, value);
  } else if (key == "ats.use_sim") {
    use_sim = to_bool(key, value);
  } else if (key == "ats.baseline_decay") {
    baseline_decay = to_double(key, value);
  } else if (key == "ats.sim_mode") {
    if (value == "cosine") sim_mode = metalearn::SimMode::cosine;
    else if (value == "inner_product") sim_mode = metalearn::SimMode::inner_product;
    else throw ConfigError("config: unknown sim mode '" + value + "'");
  } else if (key == "model.hidden") {
    hidden = to_int_list(key, value);
  } else if (key == "eval.test_tasks") {
    test_tasks = static_cast<int>(to_long(key, value));
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

ExperimentConfig ExperimentConfig::from_kv(const std::map<std::string, std::string>& kv) {
  Regime regime = Regime::noise;
  if (auto it = kv.find("regime"); it != kv.end()) {
    if (it->second == "budget") regime = Regime::budget;
    else if (it->second != "noise")
      throw ConfigError("config: unknown regime '" + it->second + "'");
  }
  ExperimentConfig c = defaults_for(regime);
  for (const auto& [key, value] : kv) c.apply_key(key, value);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  return from_kv(parse_kv_file(path));
}

std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: empty key or value on line " + std::to_string(line_no));
    if (kv.contains(key))
      throw ConfigError("config: duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> ExperimentConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["regime"] = regime == Regime::noise ? "noise" : "budget";
  kv["seed"] = std::to_string(seed);
  kv["out"] = out;
  kv["task.family"] = family == taskgen::FamilyConfig::Family::sinusoid ? "sinusoid"
                      : family == taskgen::FamilyConfig::Family::cluster ? "cluster"
                                                                         : "blobs";
  kv["task.k_shot"] = std::to_string(k_shot);
  kv["task.query_size"] = std::to_string(query_size);
  kv["task.n_way"] = std::to_string(n_way);
  kv["task.n_classes"] = std::to_string(n_classes);
  kv["task.input_dim"] = std::to_string(input_dim);
  kv["task.amp_min"] = format_double(amp_min);
  kv["task.amp_max"] = format_double(amp_max);
  kv["task.phase_min"] = format_double(phase_min);
  kv["task.phase_max"] = format_double(phase_max);
  kv["task.cluster_weights"] = join(cluster_weights);
  kv["task.budget"] = std::to_string(budget);
  kv["noise.kind"] = noise_kind == taskgen::CorruptionKind::none      ? "none"
                     : noise_kind == taskgen::CorruptionKind::flip    ? "flip"
                                                                      : "gaussian";
  kv["noise.task_fraction"] = format_double(noise_task_fraction);
  kv["noise.flip_intensity"] = format_double(flip_intensity);
  kv["noise.eta"] = format_double(eta);
  kv["sched.name"] = to_string(scheduler);
  kv["sched.spl_growth"] = format_double(spl_growth);
  kv["sched.spl_epoch"] = std::to_string(spl_epoch);
  kv["sched.focal_gamma"] = format_double(focal_gamma);
  kv["train.pool"] = std::to_string(pool);
  kv["train.batch"] = std::to_string(batch);
  kv["train.n_val"] = std::to_string(n_val);
  kv["train.val_pool"] = std::to_string(val_pool);
  kv["train.inner_steps"] = std::to_string(inner_steps);
  kv["train.alpha"] = format_double(alpha);
  kv["train.beta"] = format_double(beta);
  kv["train.max_iterations"] = std::to_string(max_iterations);
  kv["train.warm_start"] = std::to_string(warm_start);
  kv["train.pretrain_clean"] = std::to_string(pretrain_clean);
  kv["train.finetune_iters"] = std::to_string(finetune_iters);
  kv["train.meta_grad"] =
      meta_grad == metalearn::MetaGradMode::first_order ? "first_order" : "exact_head";
  kv["ats.gamma"] = format_double(gamma);
  kv["ats.tau"] = format_double(tau);
  kv["ats.encoder"] = encoder == ats::EncoderKind::pool_bilstm ? "bilstm" : "mlp";
  kv["ats.use_loss"] = use_loss ? "true" : "false";
  kv["ats.use_sim"] = use_sim ? "true" : "false";
  kv["ats.baseline_decay"] = format_double(baseline_decay);
  kv["ats.sim_mode"] =
      sim_mode == metalearn::SimMode::cosine ? "cosine" : "inner_product";
  kv["model.hidden"] = join(hidden);
  kv["eval.test_tasks"] = std::to_string(test_tasks);
  return kv;
}

void ExperimentConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  positive(alpha, "train.alpha");
  positive(beta, "train.beta");
  positive(gamma, "ats.gamma");
  positive(tau, "ats.tau");
  if (k_shot <= 0 || query_size <= 0) throw ConfigError("config: task sizes must be positive");
  if (pool <= 0 || batch <= 0 || batch > pool)
    throw ConfigError("config: need 0 < batch <= pool");
  if (max_iterations <= 0) throw ConfigError("config: max_iterations must be positive");
  if (warm_start < 0 || pretrain_clean < 0 || finetune_iters < 0)
    throw ConfigError("config: phase lengths must be non-negative");
  if (noise_task_fraction < 0.0 || noise_task_fraction > 1.0)
    throw ConfigError("config: noise.task_fraction must lie in [0, 1]");
  if (eta < 0.0) throw ConfigError("config: noise.eta must be non-negative");
  if (flip_intensity < 0.0 || flip_intensity > 1.0)
    throw ConfigError("config: noise.flip_intensity must lie in [0, 1]");
  if (inner_steps < 1) throw ConfigError("config: train.inner_steps must be >= 1");
  if (val_pool != 0 && val_pool < n_val)
    throw ConfigError("config: train.val_pool must be 0 or >= train.n_val");
  if (hidden.empty()) throw ConfigError("config: model.hidden must not be empty");
  if (regime == Regime::budget && budget <= 0)
    throw ConfigError("config: budget regime needs task.budget > 0");
  if (noise_kind == taskgen::CorruptionKind::flip &&
      family != taskgen::FamilyConfig::Family::blobs)
    throw ConfigError("config: label flipping applies to classification tasks only");
  if (noise_kind == taskgen::CorruptionKind::gaussian &&
      family == taskgen::FamilyConfig::Family::blobs)
    throw ConfigError("config: gaussian label noise applies to regression tasks only");
  if (!use_loss && !use_sim)
    throw ConfigError("config: the neural scheduler needs at least one factor input");
}

}  // namespace metasched::harness
