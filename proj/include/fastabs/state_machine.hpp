#pragma once

#include "fastabs/switching.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fastabs {

enum class Policy {
  FastAbs,           // sweep M_ABS beams on one module, infer the rest
  ExhaustiveSearch,  // sweep M_ES beams everywhere
};

struct SwitchConfig {
  Policy policy = Policy::FastAbs;
  int num_tx_beams = 2;             // S
  int num_modules = 2;              // P
  int sweep_beams_abs = 4;          // M_ABS
  int sweep_beams_es = 9;           // M_ES
  double hysteresis_db = 3.0;       // delta
  VirtualMode mode = VirtualMode::Simplified;
  ModuleLayout layout = two_module_handset_layout();
  Codebook selection_codebook;      // deployable receive codebook, shared by all modules
  SubcarrierGrid grid;

  void validate() const;
};

// Events.
struct PowerReportReady {
  PowerReport report;
};
struct CsiMeasured {
  CsiMatrix csi;
};
struct TuplesExtracted {
  int tx_beam = 0;
  std::vector<PathTuple> paths;
};
struct BsBeamAvailable {
  int tx_beam = 0;
};
struct BlockageChange {
  PowerReport report;
};
using SwitchEvent = std::variant<PowerReportReady, CsiMeasured, TuplesExtracted, BsBeamAvailable, BlockageChange>;

std::string event_name(const SwitchEvent& event);

// Actions requested from the environment.
struct SweepBeams {
  int module = 0;
  int tx_beam = 0;
  int num_beams = 0;
};
struct ExtractTuples {
  int module = 0;
  int tx_beam = 0;
};
struct SwitchTo {
  SwitchDecision decision;
};
/// Exhaustive re-sweep of every (tx beam, module) pair.
struct SweepAll {
  int slots = 0;
};
using SwitchAction = std::variant<SweepBeams, ExtractTuples, SwitchTo, SweepAll>;

enum class Phase { Connected, AwaitCsi, AwaitTuples };

std::string phase_name(Phase phase);

/// Tuples extracted for one tx beam, with the detector power of the module
/// that measured them at that time.
struct TupleRecord {
  std::vector<PathTuple> paths;
  int source_module = 0;
  double source_power = 0.0;
};

struct SwitchState {
  Phase phase = Phase::Connected;
  SwitchDecision current;
  int active_tx_beam = 0;
  std::optional<PowerReport> power;
  std::map<int, TupleRecord> records;  // by tx beam
  ScoreTable scores;
};

struct StepResult {
  SwitchState state;
  std::vector<SwitchAction> actions;
  long slots = 0;
};

class InvalidEvent : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Initial state: connected on `initial`, nothing measured yet.
SwitchState initial_switch_state(const SwitchDecision& initial);

/// Pure transition: one event in, the next state plus requested actions and
/// the beam-sweep slots charged to this step.
StepResult step_state_machine(const SwitchState& state, const SwitchEvent& event, const SwitchConfig& config);

/// Rebuilds all scores from the stored tuple records and the latest power report.
ScoreTable rescore(const SwitchState& state, const SwitchConfig& config);

/// Slot counters per scenario stage.
class SlotLedger {
 public:
  void charge(int stage, long slots);
  long at(int stage) const;
  long total() const;
  const std::map<int, long>& stages() const { return per_stage_; }

 private:
  std::map<int, long> per_stage_;
};

}  // namespace fastabs
