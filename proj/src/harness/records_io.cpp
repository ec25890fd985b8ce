#include "metasched/harness/records_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metasched/errors.hpp"

namespace metasched::harness {

using nlohmann::json;

namespace {

json factors_to_json(const std::vector<metalearn::TaskFactors>& factors) {
  json arr = json::array();
  for (const auto& f : factors) {
    arr.push_back({{"task_id", f.task_id},
                   {"query_loss", f.query_loss},
                   {"grad_sim", f.grad_similarity},
                   {"support_grad_norm", f.support_grad_norm},
                   {"query_grad_norm", f.query_grad_norm},
                   {"progress", f.progress}});
  }
  return arr;
}

std::vector<metalearn::TaskFactors> factors_from_json(const json& arr) {
  std::vector<metalearn::TaskFactors> out;
  for (const auto& j : arr) {
    metalearn::TaskFactors f;
    f.task_id = j.at("task_id").get<long>();
    f.query_loss = j.at("query_loss").get<double>();
    f.grad_similarity = j.at("grad_sim").get<double>();
    f.support_grad_norm = j.at("support_grad_norm").get<double>();
    f.query_grad_norm = j.at("query_grad_norm").get<double>();
    f.progress = j.at("progress").get<double>();
    out.push_back(f);
  }
  return out;
}

double number_or_nan(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null())
    return std::numeric_limits<double>::quiet_NaN();
  return j.at(key).get<double>();
}

}  // namespace

void write_records(std::ostream& os, std::span<const ats::EpisodeRecord> records) {
  json header = {{"schema", "metasched.episode"},
                 {"version", kRecordSchemaVersion},
                 {"count", records.size()}};
  os << header.dump() << "\n";
  for (const auto& r : records) {
    json j = {{"iter", r.iteration},
              {"task_ids", r.task_ids},
              {"noisy", r.noisy},
              {"cluster", r.cluster},
              {"factors", factors_to_json(r.factors)},
              {"weights", r.weights},
              {"sampled", r.sampled},
              {"rewards", r.rewards},
              {"reward_mean", r.reward_mean},
              {"baseline", r.baseline},
              {"train_loss", r.train_loss}};
    os << j.dump() << "\n";
  }
}

void write_records_file(const std::filesystem::path& path,
                        std::span<const ats::EpisodeRecord> records) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot open records file for writing: " + path.string());
  write_records(os, records);
}

std::vector<ats::EpisodeRecord> read_records(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw UsageError("records: empty stream");
  const json header = json::parse(line);
  if (header.value("schema", "") != "metasched.episode")
    throw UsageError("records: unexpected schema header");
  if (header.value("version", -1) != kRecordSchemaVersion)
    throw UsageError("records: unsupported schema version");
  std::vector<ats::EpisodeRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    ats::EpisodeRecord r;
    r.iteration = j.at("iter").get<long>();
    r.task_ids = j.at("task_ids").get<std::vector<long>>();
    r.noisy = j.at("noisy").get<std::vector<std::uint8_t>>();
    r.cluster = j.at("cluster").get<std::vector<int>>();
    r.factors = factors_from_json(j.at("factors"));
    r.weights = j.at("weights").get<std::vector<double>>();
    r.sampled = j.at("sampled").get<std::vector<int>>();
    r.rewards = j.at("rewards").get<std::vector<double>>();
    r.reward_mean = number_or_nan(j, "reward_mean");
    r.baseline = number_or_nan(j, "baseline");
    r.train_loss = number_or_nan(j, "train_loss");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ats::EpisodeRecord> read_records_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open records file: " + path.string());
  return read_records(is);
}

}  // namespace metasched::harness
