#include "lbcnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "lbcnn/error.hpp"

namespace lbcnn {

LabeledSignals LabeledSignals::subset(const std::vector<std::size_t>& rows) const {
  LabeledSignals out;
  out.num_classes = num_classes;
  out.signals.resize(static_cast<Eigen::Index>(rows.size()), signals.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.signals.row(static_cast<Eigen::Index>(r)) = signals.row(static_cast<Eigen::Index>(rows[r]));
    out.labels.push_back(labels[rows[r]]);
    out.group_ids.push_back(group_ids[rows[r]]);
  }
  return out;
}

std::pair<int, int> bump_centers(const TriMesh& mesh) {
  const auto dist = ring_distances(mesh, 0);
  int far = 0;
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (dist[v] != kUnreachable && dist[v] > dist[far]) far = static_cast<int>(v);
  }
  return {0, far};
}

LabeledSignals generate_bump_dataset(const TriMesh& mesh, const BumpParams& params, std::uint64_t seed) {
  if (params.n_per_class < 1) throw InputError("bump dataset: n_per_class must be positive");
  if (params.noise_sigma < 0.0 || !(params.bump_width > 0.0) || !(params.bump_height > 0.0) ||
      params.jitter_rings < 0) {
    throw InputError("bump dataset: noise must be nonnegative; width and height positive");
  }
  const auto [center_a, center_b] = bump_centers(mesh);
  const double separation = static_cast<double>(ring_distance(mesh, center_a, center_b));
  // Two bumps closer than two widths are indistinguishable at this resolution.
  if (2.0 * params.bump_width >= separation) {
    throw InputError("bump dataset: width " + std::to_string(params.bump_width) +
                     " too large for center separation of " + std::to_string(separation) + " rings");
  }

  std::vector<std::vector<int>> candidates(2);
  for (int label = 0; label < 2; ++label) {
    const auto d = ring_distances(mesh, label == 0 ? center_a : center_b);
    for (std::size_t v = 0; v < d.size(); ++v)
      if (d[v] <= static_cast<std::size_t>(params.jitter_rings)) candidates[label].push_back(static_cast<int>(v));
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> scans_per_subject(1, 3);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double clip = 8.0 * params.noise_sigma;
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());

  LabeledSignals data;
  data.num_classes = 2;
  data.signals.resize(2 * params.n_per_class, n);
  int group = 0;
  Eigen::Index row = 0;
  for (int label = 0; label < 2; ++label) {
    int produced = 0;
    while (produced < params.n_per_class) {
      const int scans = std::min(scans_per_subject(rng), params.n_per_class - produced);
      std::uniform_int_distribution<std::size_t> pick(0, candidates[label].size() - 1);
      const int center = candidates[label][pick(rng)];
      const auto d = ring_distances(mesh, center);
      for (int s = 0; s < scans; ++s) {
        for (Eigen::Index v = 0; v < n; ++v) {
          const double r = static_cast<double>(d[v]);
          const double bump = params.bump_height * std::exp(-r * r / (2.0 * params.bump_width * params.bump_width));
          const double eps = std::clamp(params.noise_sigma * noise(rng), -clip, clip);
          data.signals(row, v) = bump + eps;
        }
        data.labels.push_back(label);
        data.group_ids.push_back(group);
        ++row;
      }
      produced += scans;
      ++group;
    }
  }
  return data;
}

Splits split_grouped(const LabeledSignals& data, const SplitFractions& fractions, std::uint64_t seed) {
  const double f[3] = {fractions.train, fractions.val, fractions.test};
  if (f[0] < 0 || f[1] < 0 || f[2] < 0 || std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw InputError("split fractions must be nonnegative and sum to 1");
  }
  const int active = (f[0] > 0) + (f[1] > 0) + (f[2] > 0);

  std::map<int, int> group_label;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto [it, inserted] = group_label.emplace(data.group_ids[i], data.labels[i]);
    if (!inserted && it->second != data.labels[i]) {
      throw InputError("group " + std::to_string(data.group_ids[i]) + " mixes class labels");
    }
  }
  std::map<int, std::vector<int>> groups_by_class;
  for (const auto& [g, label] : group_label) groups_by_class[label].push_back(g);

  std::mt19937_64 rng(seed);
  std::map<int, int> split_of_group;
  for (auto& [label, groups] : groups_by_class) {
    const int G = static_cast<int>(groups.size());
    if (G < active) {
      throw InputError("class " + std::to_string(label) + " has " + std::to_string(G) + " groups, fewer than " +
                       std::to_string(active) + " splits");
    }
    std::shuffle(groups.begin(), groups.end(), rng);

    // Largest-remainder apportionment, then every active split gets at least one group.
    int count[3];
    double remainder[3];
    int assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = f[s] * G;
      count[s] = static_cast<int>(std::floor(exact));
      remainder[s] = exact - count[s];
      assigned += count[s];
    }
    while (assigned < G) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (remainder[s] > remainder[best]) best = s;
      ++count[best];
      remainder[best] = -1.0;
      ++assigned;
    }
    for (int s = 0; s < 3; ++s) {
      if (f[s] > 0 && count[s] == 0) {
        const int donor = static_cast<int>(std::max_element(count, count + 3) - count);
        --count[donor];
        ++count[s];
      }
    }
    int pos = 0;
    for (int s = 0; s < 3; ++s)
      for (int k = 0; k < count[s]; ++k) split_of_group[groups[pos++]] = s;
  }

  std::vector<std::size_t> rows[3];
  for (std::size_t i = 0; i < data.size(); ++i) rows[split_of_group[data.group_ids[i]]].push_back(i);
  return Splits{data.subset(rows[0]), data.subset(rows[1]), data.subset(rows[2])};
}

LabeledSignals read_signals_csv(std::istream& in, std::size_t num_vertices) {
  LabeledSignals data;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.rfind("group_id", 0) == 0) continue;

    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != num_vertices + 2) {
      throw InputError("signals CSV line " + std::to_string(line_no) + ": expected " +
                       std::to_string(num_vertices + 2) + " columns, found " + std::to_string(cells.size()));
    }
    auto parse = [&](const std::string& text) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || text.find_first_not_of(" \t", used) != std::string::npos) {
        throw InputError("signals CSV line " + std::to_string(line_no) + ": unparseable value '" + text + "'");
      }
      if (std::isnan(v)) throw InputError("signals CSV line " + std::to_string(line_no) + ": NaN value");
      return v;
    };
    const double group = parse(cells[0]);
    const double label = parse(cells[1]);
    if (group != std::floor(group) || label != std::floor(label) || label < 0) {
      throw InputError("signals CSV line " + std::to_string(line_no) + ": group and label must be integers");
    }
    data.group_ids.push_back(static_cast<int>(group));
    data.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
    std::vector<double> values(num_vertices);
    for (std::size_t v = 0; v < num_vertices; ++v) values[v] = parse(cells[v + 2]);
    rows.push_back(std::move(values));
  }
  data.num_classes = std::max(2, max_label + 1);
  data.signals.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(num_vertices));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t v = 0; v < num_vertices; ++v) data.signals(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v)) = rows[r][v];
  return data;
}

LabeledSignals load_signals_csv(const std::string& path, const TriMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open signals file " + path);
  return read_signals_csv(in, mesh.num_vertices());
}

void write_signals_csv(std::ostream& out, const LabeledSignals& data) {
  out << "group_id,label";
  for (Eigen::Index v = 0; v < data.signals.cols(); ++v) out << ",v" << v;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.group_ids[i] << ',' << data.labels[i];
    for (Eigen::Index v = 0; v < data.signals.cols(); ++v) out << ',' << data.signals(static_cast<Eigen::Index>(i), v);
    out << '\n';
  }
}

void save_signals_csv(const std::string& path, const LabeledSignals& data) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write signals file " + path);
  write_signals_csv(out, data);
}

}  // namespace lbcnn
