#include "gstpp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "gstpp/rng.hpp"

namespace gstpp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_num(const std::string& s, long row, const char* col) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("row " + std::to_string(row) + ": cannot parse " + col + " value '" + s + "'");
  }
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) return {};  // empty file → empty dataset
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_line(line);
  const std::vector<std::string> base = {"seq_id", "t", "x", "y"};
  bool with_truth = header.size() == 6;
  if (header.size() != 4 && header.size() != 6)
    throw DataError(path + ": expected header seq_id,t,x,y[,true_logpt,true_logps]");
  for (size_t i = 0; i < 4; ++i)
    if (header[i] != base[i])
      throw DataError(path + ": bad header column " + std::to_string(i + 1) + " '" + header[i] +
                      "', expected '" + base[i] + "'");
  if (with_truth && (header[4] != "true_logpt" || header[5] != "true_logps"))
    throw DataError(path + ": truth columns must be true_logpt,true_logps");

  Dataset data;
  std::unordered_set<std::string> finished;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_line(line);
    if (f.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    Event e{parse_num(f[1], row, "t"), parse_num(f[2], row, "x"), parse_num(f[3], row, "y")};
    if (data.seqs.empty() || data.seqs.back().id != f[0]) {
      if (finished.count(f[0]))
        throw DataError("row " + std::to_string(row) + ": sequence '" + f[0] +
                        "' reappears non-contiguously");
      if (!data.seqs.empty()) finished.insert(data.seqs.back().id);
      data.seqs.push_back(EventSeq{f[0], {}, {}, {}});
    }
    EventSeq& seq = data.seqs.back();
    if (!seq.events.empty() && e.t <= seq.events.back().t)
      throw DataError("row " + std::to_string(row) + ": non-increasing timestamp " +
                      std::to_string(e.t) + " in sequence '" + f[0] + "'");
    seq.events.push_back(e);
    if (with_truth) {
      seq.true_logpt.push_back(parse_num(f[4], row, "true_logpt"));
      seq.true_logps.push_back(parse_num(f[5], row, "true_logps"));
    }
  }
  return data;
}

void save_csv(const std::string& path, const Dataset& data, bool with_truth) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  out << "seq_id,t,x,y";
  if (with_truth) out << ",true_logpt,true_logps";
  out << "\n";
  for (const auto& seq : data.seqs) {
    for (size_t i = 0; i < seq.events.size(); ++i) {
      const Event& e = seq.events[i];
      out << seq.id << "," << e.t << "," << e.x << "," << e.y;
      if (with_truth) out << "," << seq.true_logpt[i] << "," << seq.true_logps[i];
      out << "\n";
    }
  }
}

Normalizer Normalizer::fit(const Dataset& train) {
  if (train.seqs.empty()) throw DataError("normalizer: empty training set");
  double gap_sum = 0;
  long gap_n = 0;
  double sx = 0, sy = 0, sxx = 0, syy = 0;
  long n = 0;
  for (const auto& seq : train.seqs) {
    for (size_t i = 0; i < seq.events.size(); ++i) {
      const Event& e = seq.events[i];
      sx += e.x;
      sy += e.y;
      sxx += e.x * e.x;
      syy += e.y * e.y;
      ++n;
      if (i > 0) {
        gap_sum += e.t - seq.events[i - 1].t;
        ++gap_n;
      }
    }
  }
  Normalizer nz;
  const double mean_gap = gap_n > 0 ? gap_sum / static_cast<double>(gap_n) : 1.0;
  nz.t_scale = mean_gap > 0 ? 1.0 / mean_gap : 1.0;
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  const double vx = sxx / static_cast<double>(n) - mx * mx;
  const double vy = syy / static_cast<double>(n) - my * my;
  nz.x_offset = mx;
  nz.y_offset = my;
  nz.x_scale = vx > 1e-24 ? 1.0 / std::sqrt(vx) : 1.0;
  nz.y_scale = vy > 1e-24 ? 1.0 / std::sqrt(vy) : 1.0;
  return nz;
}

Dataset Normalizer::apply(const Dataset& d) const {
  Dataset out = d;
  for (auto& seq : out.seqs)
    for (auto& e : seq.events) e = apply(e);
  return out;
}

void split_dataset(const Dataset& all, double val_frac, uint64_t seed, Dataset& train,
                   Dataset& val) {
  std::vector<size_t> idx(all.seqs.size());
  std::iota(idx.begin(), idx.end(), size_t(0));
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  size_t n_val = static_cast<size_t>(std::floor(val_frac * static_cast<double>(idx.size())));
  if (val_frac > 0 && n_val == 0 && idx.size() >= 2) n_val = 1;
  train.seqs.clear();
  val.seqs.clear();
  for (size_t i = 0; i < idx.size(); ++i)
    (i < n_val ? val : train).seqs.push_back(all.seqs[idx[i]]);
}

}  // namespace gstpp
