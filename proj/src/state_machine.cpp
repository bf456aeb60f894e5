#include "fastabs/state_machine.hpp"

#include <numeric>

namespace fastabs {

void SwitchConfig::validate() const {
  if (num_tx_beams < 1 || num_modules < 1) throw std::invalid_argument("SwitchConfig: S and P must be >= 1");
  if (sweep_beams_abs < 1 || sweep_beams_es < 1)
    throw std::invalid_argument("SwitchConfig: sweep sizes must be >= 1");
  if (!(hysteresis_db >= 0.0)) throw std::invalid_argument("SwitchConfig: hysteresis must be >= 0 dB");
  if (layout.size() < num_modules) throw std::invalid_argument("SwitchConfig: layout has fewer modules than P");
  if (selection_codebook.num_beams() < 1) throw std::invalid_argument("SwitchConfig: empty selection codebook");
  grid.validate();
}

std::string event_name(const SwitchEvent& event) {
  static const char* names[] = {"PowerReportReady", "CsiMeasured", "TuplesExtracted", "BsBeamAvailable",
                                "BlockageChange"};
  return names[event.index()];
}

std::string phase_name(Phase phase) {
  switch (phase) {
    case Phase::Connected: return "Connected";
    case Phase::AwaitCsi: return "AwaitCsi";
    case Phase::AwaitTuples: return "AwaitTuples";
  }
  return "?";
}

SwitchState initial_switch_state(const SwitchDecision& initial) {
  SwitchState s;
  s.current = initial;
  s.active_tx_beam = initial.tx_beam;
  return s;
}

ScoreTable rescore(const SwitchState& state, const SwitchConfig& config) {
  ScoreTable table;
  for (const auto& [tx, rec] : state.records) {
    for (int q = 0; q < config.num_modules; ++q) {
      double rho = 1.0;
      if (state.power && rec.source_power > 0.0) {
        const auto& pw = state.power->power;
        if (q >= static_cast<int>(pw.size())) throw std::invalid_argument("power report has too few modules");
        rho = std::sqrt(pw[static_cast<std::size_t>(q)] / rec.source_power);
      }
      const VirtualCsi v = reconstruct_virtual_csi(rec.paths, config.layout, rec.source_module, q, rho,
                                                   config.selection_codebook, config.grid, config.mode, tx);
      table.set_module(tx, q, beam_scores(v.entries));
    }
  }
  return table;
}

namespace {

int sweep_size(const SwitchConfig& c) {
  return c.policy == Policy::FastAbs ? c.sweep_beams_abs : c.sweep_beams_es;
}

void require_phase(const SwitchState& s, Phase expected, const SwitchEvent& event) {
  if (s.phase != expected)
    throw InvalidEvent(event_name(event) + " is not valid in phase " + phase_name(s.phase));
}

void decide(StepResult& r, const SwitchConfig& config) {
  SwitchState& s = r.state;
  s.scores = rescore(s, config);
  if (s.scores.empty()) return;
  const SwitchDecision best = select_best(s.scores);
  const auto& cur = s.current;
  const bool known = s.scores.contains(cur.tx_beam, cur.beam, cur.module);
  const double current_score = known ? s.scores.at(cur.tx_beam, cur.beam, cur.module) : 0.0;
  s.current.score = current_score;
  const bool same = best.tx_beam == cur.tx_beam && best.beam == cur.beam && best.module == cur.module;
  if (!same && best.score > current_score * db_to_power(config.hysteresis_db)) {
    s.current = best;
    s.active_tx_beam = best.tx_beam;
    r.actions.push_back(SwitchTo{best});
  }
}

void request_sweep(StepResult& r, const SwitchConfig& config, int tx_beam) {
  const int beams = sweep_size(config);
  r.state.active_tx_beam = tx_beam;
  r.state.phase = Phase::AwaitCsi;
  r.actions.push_back(SweepBeams{r.state.current.module, tx_beam, beams});
  r.slots += beams;
}

}  // namespace

StepResult step_state_machine(const SwitchState& state, const SwitchEvent& event, const SwitchConfig& config) {
  StepResult r{state, {}, 0};
  SwitchState& s = r.state;

  if (const auto* e = std::get_if<PowerReportReady>(&event)) {
    require_phase(s, Phase::Connected, event);
    e->report.validate();
    s.power = e->report;
    request_sweep(r, config, s.active_tx_beam);
  } else if (const auto* e = std::get_if<CsiMeasured>(&event)) {
    require_phase(s, Phase::AwaitCsi, event);
    if (e->csi.module != s.current.module || e->csi.tx_beam != s.active_tx_beam)
      throw InvalidEvent("CsiMeasured for a module or tx beam that was not swept");
    s.phase = Phase::AwaitTuples;
    r.actions.push_back(ExtractTuples{s.current.module, s.active_tx_beam});
  } else if (const auto* e = std::get_if<TuplesExtracted>(&event)) {
    require_phase(s, Phase::AwaitTuples, event);
    if (e->tx_beam != s.active_tx_beam) throw InvalidEvent("TuplesExtracted for an unexpected tx beam");
    TupleRecord rec;
    rec.paths = e->paths;
    rec.source_module = s.current.module;
    if (s.power && s.current.module < static_cast<int>(s.power->power.size()))
      rec.source_power = s.power->power[static_cast<std::size_t>(s.current.module)];
    s.records[e->tx_beam] = std::move(rec);
    s.phase = Phase::Connected;
    decide(r, config);
  } else if (const auto* e = std::get_if<BsBeamAvailable>(&event)) {
    require_phase(s, Phase::Connected, event);
    if (e->tx_beam < 0 || e->tx_beam >= config.num_tx_beams) throw InvalidEvent("BsBeamAvailable: unknown tx beam");
    request_sweep(r, config, e->tx_beam);
  } else if (const auto* e = std::get_if<BlockageChange>(&event)) {
    require_phase(s, Phase::Connected, event);
    e->report.validate();
    s.power = e->report;
    if (config.policy == Policy::ExhaustiveSearch) {
      const int slots = config.num_tx_beams * config.sweep_beams_es * config.num_modules;
      r.actions.push_back(SweepAll{slots});
      r.slots += slots;
    }
    decide(r, config);
  }
  return r;
}

void SlotLedger::charge(int stage, long slots) {
  if (slots < 0) throw std::invalid_argument("SlotLedger: negative charge");
  per_stage_[stage] += slots;
}

long SlotLedger::at(int stage) const {
  const auto it = per_stage_.find(stage);
  return it == per_stage_.end() ? 0 : it->second;
}

long SlotLedger::total() const {
  return std::accumulate(per_stage_.begin(), per_stage_.end(), 0L,
                         [](long acc, const auto& kv) { return acc + kv.second; });
}

}  // namespace fastabs
