#include "fastabs/switching.hpp"

#include <limits>
#include <stdexcept>

namespace fastabs {

std::vector<PathTuple> visible_paths(std::span<const PathTuple> paths) {
  std::vector<PathTuple> out;
  for (const auto& p : paths)
    if (in_observable_range(p.aoa)) out.push_back(p);
  return out;
}

VirtualCsi reconstruct_virtual_csi(std::span<const PathTuple> estimated, const ModuleLayout& layout, int p, int q,
                                   double rho, const Codebook& codebook, const SubcarrierGrid& grid,
                                   VirtualMode mode, int tx_beam) {
  std::vector<PathTuple> mapped = map_tuples(estimated, layout, p, q, rho);
  if (mode == VirtualMode::Simplified)
    for (std::size_t l = 0; l < mapped.size(); ++l) mapped[l].toa = estimated[l].toa;
  const auto visible = visible_paths(mapped);
  return {synthesize_entries(visible, codebook, grid), q, tx_beam, mode};
}

RVector beam_scores(const CMatrix& csi) { return csi.rowwise().squaredNorm(); }

double rsnr_db(double score, int num_subcarriers, double noise_variance) {
  if (!(score > 0.0) || num_subcarriers < 1 || !(noise_variance > 0.0))
    throw std::invalid_argument("rsnr_db: score, N_s and noise variance must be positive");
  return 10.0 * std::log10(score / (num_subcarriers * noise_variance));
}

void ScoreTable::set(int tx_beam, int beam, int module, double score) {
  if (!(score >= 0.0)) throw std::invalid_argument("ScoreTable: scores must be >= 0");
  scores_[{module, beam, tx_beam}] = score;
}

void ScoreTable::set_module(int tx_beam, int module, const RVector& scores) {
  for (Eigen::Index m = 0; m < scores.size(); ++m) set(tx_beam, static_cast<int>(m), module, scores[m]);
}

void ScoreTable::erase_module(int tx_beam, int module) {
  std::erase_if(scores_, [&](const auto& kv) {
    return std::get<0>(kv.first) == module && std::get<2>(kv.first) == tx_beam;
  });
}

bool ScoreTable::contains(int tx_beam, int beam, int module) const {
  return scores_.count({module, beam, tx_beam}) > 0;
}

double ScoreTable::at(int tx_beam, int beam, int module) const {
  const auto it = scores_.find({module, beam, tx_beam});
  if (it == scores_.end()) throw std::out_of_range("ScoreTable: no score for this (s, m, p)");
  return it->second;
}

std::vector<SwitchDecision> ScoreTable::entries() const {
  std::vector<SwitchDecision> out;
  out.reserve(scores_.size());
  for (const auto& [key, score] : scores_)
    out.push_back({std::get<2>(key), std::get<1>(key), std::get<0>(key), score});
  return out;
}

SwitchDecision select_best(const ScoreTable& table) {
  if (table.empty()) throw std::invalid_argument("select_best: empty score table");
  SwitchDecision best;
  bool first = true;
  // Map order is (module, beam, tx beam), so a strict comparison keeps the tie-break.
  for (const auto& e : table.entries()) {
    if (first || e.score > best.score) {
      best = e;
      first = false;
    }
  }
  return best;
}

OracleResult es_oracle(std::span<const PathTuple> paths, const ArraySpec& array, const SubcarrierGrid& grid,
                       double noise_variance, int grid_size, double lo, double hi) {
  if (grid_size < 2) throw std::invalid_argument("es_oracle: grid size must be >= 2");
  const RVector angles = RVector::LinSpaced(grid_size, lo, hi);
  const Codebook fine = make_dft_codebook(array, {angles.data(), static_cast<std::size_t>(angles.size())});
  const RVector scores = beam_scores(synthesize_entries(visible_paths(paths), fine, grid));
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  OracleResult r;
  r.angle = angles[best];
  r.score = scores[best];
  r.rsnr_db = r.score > 0.0 && noise_variance > 0.0 ? rsnr_db(r.score, grid.size(), noise_variance)
                                                     : -std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace fastabs
