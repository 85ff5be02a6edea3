"""
Experiment Runner - Config-driven orchestration of every command

Coordinates the modules behind one ExperimentConfig:
- gen-data: build truth, sample states and observables, write the dataset
- learn-ham / learn-state / learn-su3: train and write traces and models
- sweep: grid of learn runs in a process pool, one summary CSV
- validate: compare a learned model with the truth on held-out observables

Failures never escape run(); they come back as an ExperimentResult with
status "error" and the exit code of the typed error.
"""

from typing import Any, Dict, List, Optional, Tuple
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import itertools
import json
import logging
import os

import numpy as np

from .config import ExperimentConfig
from .dataset import (TimeSeriesDataset, generate_ham_learning_data, generate_state_learning_data,
                      make_heldout_dataset, select_coherence_observables, select_correlators)
from .errors import ArtifactIOError, DatasetError, HamLearnError
from .ham_learn import heldout_series, train_with_restarts, validation_errors
from .pauli import ParamHamiltonian, PauliObservable, build_family
from .seeding import make_rng, uniform_coeffs
from .simulator import StateVector, random_states
from .state_learn import (Ansatz, check_real_target, export_state, random_hamiltonians,
                          realizable_target, train_state_with_restarts)
from .su3 import GellMannObservable, generate_su3_data, learn_su3, random_qutrit_states
from .training_trace import TrainingTrace, format_csv

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """
    Outcome of one command.

    Attributes:
        mode: Command that ran
        status: "ok" or "error"
        artifacts: Paths of the files written
        metrics: Headline numbers (final cost, trace distance, ...)
        exit_code: Process exit status for the CLI
        error_type: Exception class name on failure
        error_message: Exception text on failure
    """
    mode: str
    status: str = "ok"
    artifacts: List[str] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = 0
    error_type: Optional[str] = None
    error_message: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _write_json(path: str, doc: Dict[str, Any]) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write {path}: {e}") from e


def _read_json(path: str, what: str) -> Dict[str, Any]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ArtifactIOError(f"Cannot read {what} {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DatasetError(f"{what} {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise DatasetError(f"{what} {path} must be a JSON object")
    return doc


def _write_rows(path: str, header: List[str], rows: List[List[Any]]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write {path}: {e}") from e


def hamiltonian_from_document(doc: Dict[str, Any]) -> ParamHamiltonian:
    """Hamiltonian from a model file, a dataset file or a bare Hamiltonian record."""
    try:
        if "hamiltonian" in doc:
            return ParamHamiltonian.from_dict(doc["hamiltonian"])
        if "generator_info" in doc:
            return ParamHamiltonian.from_dict(doc["generator_info"]["hamiltonian"])
        return ParamHamiltonian.from_dict(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"Invalid Hamiltonian record: {e}") from e


class ExperimentRunner:
    """
    Runs one ExperimentConfig and writes its artifacts.

    Attributes:
        config: Resolved configuration
        out_dir: Artifact directory
        results: Results of every run() call
    """

    def __init__(self, config: ExperimentConfig, out_dir: str = "."):
        """
        Initialize runner.

        Args:
            config: Validated experiment configuration
            out_dir: Directory for artifacts (created when missing)
        """
        self.config = config
        self.out_dir = out_dir
        self.results: List[ExperimentResult] = []

    def _path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def run(self, mode: Optional[str] = None) -> ExperimentResult:
        """
        Execute a command.

        Args:
            mode: Command to run (defaults to config.mode)

        Returns:
            ExperimentResult; errors are captured, not raised
        """
        mode = mode or self.config.mode
        handlers = {
            "gen-data": self.gen_data,
            "learn-ham": self.learn_ham,
            "learn-state": self.learn_state,
            "learn-su3": self.learn_su3,
            "sweep": self.sweep,
            "validate": self.validate,
        }
        result = ExperimentResult(mode)
        try:
            try:
                os.makedirs(self.out_dir, exist_ok=True)
            except OSError as e:
                raise ArtifactIOError(f"Cannot create output directory {self.out_dir}: {e}") from e
            config_path = self._path("config.json")
            _write_json(config_path, self.config.resolved())
            result.artifacts.append(config_path)
            handlers[mode](result)
        except HamLearnError as e:
            result.status = "error"
            result.exit_code = e.exit_code
            result.error_type = type(e).__name__
            result.error_message = str(e)
            logger.error("%s failed: %s", mode, e)
        except Exception as e:
            # graceful degradation: unexpected failures still produce a record
            result.status = "error"
            result.exit_code = 1
            result.error_type = type(e).__name__
            result.error_message = str(e)
            logger.exception("%s failed unexpectedly", mode)
        self.results.append(result)
        return result

    # ------------------------------------------------------------------
    # Builders
    # ------------------------------------------------------------------

    def truth_hamiltonian(self) -> ParamHamiltonian:
        spec = self.config.hamiltonian
        seed = spec.seed if spec.seed is not None else int(make_rng(self.config.seed, "truth").integers(2 ** 62))
        return build_family(spec.family, spec.num_sites, seed=seed, coeffs=spec.coeffs,
                            basis=spec.basis, groups=spec.groups)

    def model_template(self) -> ParamHamiltonian:
        spec = self.config.hamiltonian
        return build_family(spec.family, spec.num_sites, seed=0, basis=spec.basis, groups=spec.groups)

    def ham_dataset(self, truth: ParamHamiltonian) -> TimeSeriesDataset:
        cfg, data = self.config.learn, self.config.data
        seed = self.config.seed
        n = truth.num_sites
        state_seed = int(make_rng(seed, "train-states").integers(2 ** 62))
        states = random_states(cfg.n_states, n, state_seed)
        if data.observables:
            observables = [PauliObservable.from_label(lab, n) for lab in data.observables]
        else:
            observables = select_correlators(n, cfg.n_observables, seed)
        return generate_ham_learning_data(truth, states, observables, cfg.n_timesteps, cfg.dt,
                                          data.noise_sigma, seed, cfg.workers,
                                          generator_info={"state_seed": state_seed})

    def state_problem(self) -> Tuple[Ansatz, StateVector, TimeSeriesDataset]:
        spec, cfg = self.config.state, self.config.state_learn
        seed = self.config.seed
        ansatz = Ansatz(spec.num_qubits, spec.num_layers if spec.num_layers is not None else spec.num_qubits)
        target = realizable_target(ansatz, spec.target_seed)
        hams = random_hamiltonians(cfg.n_hamiltonians, spec.num_qubits, seed, spec.hamiltonian_family)
        observables = select_coherence_observables(spec.num_qubits, cfg.n_observables, seed)
        dataset = generate_state_learning_data(target, hams, observables, cfg.n_timesteps, cfg.dt,
                                               self.config.data.noise_sigma, seed)
        return ansatz, target, dataset

    def su3_truth(self) -> np.ndarray:
        spec = self.config.su3
        if spec.coeffs is not None:
            return np.asarray(spec.coeffs, dtype=float)
        return uniform_coeffs(8, spec.seed, "su3-truth")

    def su3_dataset(self, truth: np.ndarray) -> TimeSeriesDataset:
        cfg = self.config.su3_learn
        states = random_qutrit_states(cfg.n_states, self.config.seed)
        observables = [GellMannObservable.from_index(j) for j in range(1, cfg.n_observables + 1)]
        return generate_su3_data(truth, states, observables, cfg.n_timesteps, cfg.dt,
                                 self.config.data.noise_sigma, self.config.seed)

    def heldout(self, truth: ParamHamiltonian, n_timesteps: Optional[int] = None) -> Optional[TimeSeriesDataset]:
        data = self.config.data
        # three-point correlator sums need at least three sites
        labels = [lab for lab in data.heldout
                  if not (lab in ("XXX", "YYY", "ZZZ") and truth.num_sites < 3)]
        if not labels:
            return None
        steps = n_timesteps or data.heldout_timesteps or self.config.learn.n_timesteps
        return make_heldout_dataset(truth, labels, data.heldout_states, steps, self.config.learn.dt,
                                    self.config.seed)

    def _write_trace(self, result: ExperimentResult, trace: TrainingTrace, stem: str = "trace") -> None:
        trace.metadata["config"] = self.config.resolved()
        csv_path, json_path = self._path(stem + ".csv"), self._path(stem + ".json")
        trace.to_csv(csv_path)
        trace.to_json(json_path)
        result.artifacts += [csv_path, json_path]
        result.metrics.update({
            "epochs": trace.epochs,
            "final_cost": trace.final_cost,
            "final_trace_distance": trace.final_trace_distance,
            "final_validation_error": trace.final_validation_error,
            "stop_reason": trace.stop_reason,
        })

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    def gen_data(self, result: ExperimentResult) -> None:
        kind = self.config.data.kind
        if kind == "hamiltonian":
            dataset = self.ham_dataset(self.truth_hamiltonian())
        elif kind == "state":
            dataset = self.state_problem()[2]
        else:
            dataset = self.su3_dataset(self.su3_truth())
        json_path, csv_path = self._path("dataset.json"), self._path("dataset.csv")
        dataset.save_json(json_path, self.config.resolved())
        dataset.to_csv(csv_path)
        result.artifacts += [json_path, csv_path]
        result.metrics.update(dataset.report())

    def learn_ham(self, result: ExperimentResult) -> None:
        truth: Optional[ParamHamiltonian]
        if self.config.inputs.dataset:
            dataset = TimeSeriesDataset.load_json(self.config.inputs.dataset)
            info = dataset.generator_info
            truth = ParamHamiltonian.from_dict(info["hamiltonian"]) if "hamiltonian" in info else None
        else:
            truth = self.truth_hamiltonian()
            dataset = self.ham_dataset(truth)
        model = self.model_template()
        heldout = self.heldout(truth) if truth is not None else None
        trace = train_with_restarts(self.config.learn, dataset, model, heldout, truth)
        learned = model.with_coeffs(trace.final_params)
        self._write_trace(result, trace)
        model_path = self._path("model.json")
        doc: Dict[str, Any] = {"hamiltonian": learned.to_dict(), "report": trace.report(),
                               "config": self.config.resolved()}
        if truth is not None:
            doc["truth"] = truth.to_dict()
        _write_json(model_path, doc)
        result.artifacts.append(model_path)
        if trace.final_validation:
            path = self._path("validation.csv")
            _write_rows(path, ["observable", "validation_error"],
                        [[lab, format_csv(err)] for lab, err in sorted(trace.final_validation.items())])
            result.artifacts.append(path)
        result.metrics["learned_coeffs"] = learned.coeffs.tolist()

    def learn_state(self, result: ExperimentResult) -> None:
        if self.config.inputs.dataset:
            dataset = TimeSeriesDataset.load_json(self.config.inputs.dataset)
            if "state" not in dataset.generator_info:
                raise DatasetError("State dataset carries no target state in its generator_info")
            target = StateVector.from_dict(dataset.generator_info["state"])
            check_real_target(target)
            layers = self.config.state.num_layers
            ansatz = Ansatz(target.num_sites, layers if layers is not None else target.num_sites)
        else:
            ansatz, target, dataset = self.state_problem()
        trace = train_state_with_restarts(self.config.state_learn, dataset, ansatz, target)
        self._write_trace(result, trace)
        state_path = self._path("state.json")
        export_state(state_path, ansatz, trace.final_params, self.config.resolved())
        result.artifacts.append(state_path)

    def learn_su3(self, result: ExperimentResult) -> None:
        if self.config.inputs.dataset:
            dataset = TimeSeriesDataset.load_json(self.config.inputs.dataset)
            truth = dataset.generator_info.get("coeffs")
        else:
            truth = self.su3_truth()
            dataset = self.su3_dataset(truth)
        trace = learn_su3(self.config.su3_learn, dataset, truth=truth)
        self._write_trace(result, trace)
        model_path = self._path("model.json")
        doc = {"su3": {"coeffs": trace.final_params}, "ledger": trace.metadata["ledger"],
               "report": trace.report(), "config": self.config.resolved()}
        if truth is not None:
            doc["truth"] = {"coeffs": [float(x) for x in truth]}
            result.metrics["max_coeff_error"] = float(np.max(np.abs(np.asarray(trace.final_params) - truth)))
        _write_json(model_path, doc)
        result.artifacts.append(model_path)
        result.metrics["ledger"] = trace.metadata["ledger"]

    def sweep_cells(self) -> List[Dict[str, int]]:
        spec = self.config.sweep
        if spec.learner == "ham":
            return [{"n_timesteps": nt, "n_states": ns, "n_observables": no}
                    for nt, ns, no in itertools.product(spec.n_timesteps, spec.n_states, spec.n_observables)]
        return [{"n_timesteps": nt, "n_hamiltonians": nh}
                for nt, nh in itertools.product(spec.n_timesteps, spec.n_hamiltonians)]

    def sweep(self, result: ExperimentResult) -> None:
        cells = self.sweep_cells()
        jobs = [(self.config.resolved(), cell, self.out_dir) for cell in cells]
        workers = self.config.parallel or os.cpu_count() or 1
        if workers == 1:
            rows = [run_sweep_cell(*job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(run_sweep_cell, *zip(*jobs)))
        keys = list(cells[0])
        header = keys + ["final_cost", "final_trace_distance", "final_validation_error", "epochs"]
        path = self._path("summary.csv")
        _write_rows(path, header, [[row[k] for k in keys]
                                   + [format_csv(row["final_cost"]), format_csv(row["final_trace_distance"]),
                                      format_csv(row["final_validation_error"]), row["epochs"]]
                                   for row in rows])
        result.artifacts += [row["trace_path"] for row in rows] + [path]
        result.metrics["cells"] = len(rows)

    def validate(self, result: ExperimentResult) -> None:
        inputs = self.config.inputs
        if not inputs.model or not (inputs.truth or inputs.dataset):
            raise DatasetError("validate needs inputs.model and inputs.truth (or inputs.dataset)")
        learned = hamiltonian_from_document(_read_json(inputs.model, "model"))
        steps = self.config.data.heldout_timesteps or 4 * self.config.learn.n_timesteps
        if inputs.dataset:
            heldout = TimeSeriesDataset.load_json(inputs.dataset)
            truth = hamiltonian_from_document(heldout.to_dict())
        else:
            truth = hamiltonian_from_document(_read_json(inputs.truth, "truth"))
            heldout = self.heldout(truth, steps)
            if heldout is None:
                raise DatasetError("No held-out observable fits this register")
        if learned.num_sites != truth.num_sites:
            raise DatasetError(f"Model on {learned.num_sites} sites, truth on {truth.num_sites}")
        errors = validation_errors(learned, heldout)
        rows = heldout_series(learned, truth, heldout, steps)
        table = self._path("validation.csv")
        _write_rows(table, ["observable", "validation_error"],
                    [[lab, format_csv(err)] for lab, err in sorted(errors.items())])
        series = self._path("heldout_series.csv")
        _write_rows(series, ["observable", "i", "k", "t", "truth", "model"],
                    [[r["observable"], r["i"], r["k"], format_csv(r["t"]), format_csv(r["truth"]),
                      format_csv(r["model"])] for r in rows])
        result.artifacts += [table, series]
        result.metrics["validation"] = errors
        result.metrics["max_abs_deviation"] = max(abs(r["truth"] - r["model"]) for r in rows)

    # ------------------------------------------------------------------
    # Reporting
    # ------------------------------------------------------------------

    def report(self) -> Dict[str, Any]:
        """
        Generate a report over every run of this runner.

        Returns:
            Dictionary with per-run status and metrics
        """
        return {
            "out_dir": self.out_dir,
            "runs": len(self.results),
            "failures": sum(1 for r in self.results if r.status != "ok"),
            "results": [r.to_dict() for r in self.results],
        }

    def summary(self) -> str:
        """Generate human-readable summary."""
        lines = ["Experiment Report", "================="]
        for r in self.results:
            if r.status == "ok":
                metrics = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                                    for k, v in r.metrics.items()
                                    if isinstance(v, (int, float, str)) and v is not None)
                lines.append(f"{r.mode}: ok ({len(r.artifacts)} files) {metrics}")
            else:
                lines.append(f"{r.mode}: {r.error_type} (exit {r.exit_code}): {r.error_message}")
        return "\n".join(lines) + "\n"


def run_sweep_cell(config: Dict[str, Any], cell: Dict[str, int], out_dir: str) -> Dict[str, Any]:
    """
    Train one sweep cell; runs inside a worker process.

    Args:
        config: Resolved experiment config (plain JSON form)
        cell: Dataset sizes of the cell
        out_dir: Artifact directory

    Returns:
        Summary row with the cell's final metrics and trace path
    """
    data = json.loads(json.dumps(config))
    section = "learn" if "n_states" in cell else "state_learn"
    data[section].update(cell)
    cfg = ExperimentConfig.from_dict(data)
    runner = ExperimentRunner(cfg, out_dir)
    if section == "learn":
        truth = runner.truth_hamiltonian()
        dataset = runner.ham_dataset(truth)
        trace = train_with_restarts(cfg.learn, dataset, runner.model_template(), runner.heldout(truth), truth)
    else:
        ansatz, target, dataset = runner.state_problem()
        trace = train_state_with_restarts(cfg.state_learn, dataset, ansatz, target)
    stem = "trace_" + "_".join(f"{k}{v}" for k, v in cell.items())
    trace.metadata["config"] = cfg.resolved()
    path = os.path.join(out_dir, stem + ".csv")
    trace.to_csv(path)
    return {**cell, "final_cost": trace.final_cost, "final_trace_distance": trace.final_trace_distance,
            "final_validation_error": trace.final_validation_error, "epochs": trace.epochs,
            "trace_path": path}
