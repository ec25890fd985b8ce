#include "metasched/taskgen/task.hpp"

#include <cstring>
#include <ostream>

#include "metasched/errors.hpp"

namespace metasched::taskgen {

FlipMatrix FlipMatrix::symmetric(int n_classes, double noise_ratio) {
  if (n_classes < 2) throw ConfigError("flip matrix needs at least 2 classes");
  if (noise_ratio < 0.0 || noise_ratio > 1.0)
    throw ConfigError("flip noise ratio must lie in [0, 1]");
  numkit::Tensor probs({n_classes, n_classes});
  const double off = noise_ratio / (n_classes - 1);
  for (int i = 0; i < n_classes; ++i)
    for (int j = 0; j < n_classes; ++j) probs.at(i, j) = i == j ? 1.0 - noise_ratio : off;
  return FlipMatrix(n_classes, noise_ratio, std::move(probs));
}

std::uint64_t tensor_digest(const numkit::Tensor& t) {
  // FNV-1a over the raw little-endian bytes of the data.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < t.numel(); ++i) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    const double v = t[i];
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void export_pool(const TaskPool& pool, std::ostream& os) {
  os << "# task pool, iteration " << pool.iteration << ", size " << pool.size() << "\n";
  for (const TaskInstance& t : pool.tasks) {
    os << "task_id=" << t.task_id << " kind="
       << (t.kind == TaskKind::regression ? "regression" : "classification")
       << " cluster=" << t.cluster_id << " noisy=" << (t.is_noisy ? 1 : 0)
       << " universe=" << t.universe_id << std::hex << " support_digest="
       << tensor_digest(t.support_x) << ":" << tensor_digest(t.support_y)
       << " query_digest=" << tensor_digest(t.query_x) << ":" << tensor_digest(t.query_y)
       << std::dec << "\n";
  }
}

}  // namespace metasched::taskgen
