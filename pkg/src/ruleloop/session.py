"""The budgeted interactive loop: train the teacher/student pair, pick
instances, query the expert for labels and for judgments on mined rules,
and account for every cost unit spent.

Sessions are event-sourced: the query log plus the initial state is enough
to reconstruct the final labeled set, rule set, and budget, and two runs
with the same seed and a simulated oracle produce identical logs.
Timestamps in the log are logical counters, not wall-clock times.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .analysis import macro_f1
from .corpus import Corpus, FeatureAtom
from .features import FeatureIndex, build_index
from .rulegen import RuleGenParams, extract_candidates, select_for_query
from .rules import Rule, build_label_matrix, covered_ids, save_rules
from .sampling import SamplerState, build_hierarchy, select_batch, random_select, uncertainty_select
from .student import SoftDataset, StudentHyper, StudentModel, predict_labels, predict_proba, train, save_model
from .teacher import TEACHERS, TeacherOutput, train_teacher

SAMPLERS = ("hierarchical", "uncertainty", "random")


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of parts (strings/ints)."""
    canon = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(canon.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


@dataclass
class SessionConfig:
    teacher: str = "dawid_skene"
    sampler: str = "hierarchical"
    budget: float = 100.0
    cost_instance: float = 1.0
    cost_rule: float = 1.0
    batch_size: int = 10
    min_coverage: int = 100
    min_precision: float = 0.75
    max_predicate_len: int = 3
    beta: int = 1
    t_oracle: float = 0.75
    lam: float = 1.0
    learning_rate: float = 0.1
    epochs: int = 200
    student_batch_size: int = 32
    early_stop_patience: int | None = 10
    ngram_max: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.teacher not in TEACHERS:
            raise ValueError(f"unknown teacher {self.teacher!r}")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.cost_instance <= 0 or self.cost_rule <= 0:
            raise ValueError("query costs must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.t_oracle <= 1.0:
            raise ValueError("t_oracle must lie in [0, 1]")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        self.rulegen_params()  # validates coverage/precision/len/beta

    def rulegen_params(self) -> RuleGenParams:
        return RuleGenParams(
            min_coverage=self.min_coverage,
            min_precision=self.min_precision,
            max_predicate_len=self.max_predicate_len,
            beta=self.beta,
        )

    def student_hyper(self, seed: int) -> StudentHyper:
        return StudentHyper(
            lam=self.lam,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.student_batch_size,
            early_stop_patience=self.early_stop_patience,
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def from_dict(data: dict) -> "SessionConfig":
        known = {f.name for f in fields(SessionConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return SessionConfig(**data)

    @staticmethod
    def load(path) -> "SessionConfig":
        with open(path, encoding="utf-8") as fh:
            return SessionConfig.from_dict(json.load(fh))


@dataclass
class Budget:
    total: float
    cost_instance: float
    cost_rule: float
    spent: float = 0.0

    def remaining(self) -> float:
        return self.total - self.spent

    def charge(self, cost: float) -> None:
        if cost > self.remaining():
            raise RuntimeError(f"cannot charge {cost} with {self.remaining()} remaining")
        self.spent += cost


class Oracle:
    """Answer source for expert queries; answers must be stable within a
    session for repeated identical queries."""

    def answer_instance(self, instance) -> int:
        raise NotImplementedError

    def answer_rule(self, rule: Rule, context) -> bool:
        raise NotImplementedError

    def begin_instance_batch(self, instances) -> None:
        """Called with the full upcoming batch before sequential querying."""


@dataclass
class SimulatedOracle(Oracle):
    """Ground-truth-backed answers: gold labels for instances, and rule
    acceptance iff accuracy over covered unlabeled instances strictly
    exceeds the threshold (a rule covering nothing is rejected)."""

    corpus: Corpus
    index: FeatureIndex
    t_oracle: float = 0.75

    def answer_instance(self, instance) -> int:
        if instance.gold_label is None:
            raise ValueError(f"no gold label for instance {instance.id!r}")
        return instance.gold_label

    def answer_rule(self, rule: Rule, context=None) -> bool:
        covered = covered_ids(rule, self.index, "unlabeled")
        if not covered:
            return False
        correct = sum(1 for i in covered if self.corpus.get(i).gold_label == rule.label)
        return correct / len(covered) > self.t_oracle


def simulated_oracle(corpus: Corpus, t_oracle: float, index: FeatureIndex | None = None) -> SimulatedOracle:
    for inst in corpus.split_instances("unlabeled"):
        if inst.gold_label is None:
            raise ValueError("simulated oracle requires gold labels on the unlabeled split")
    return SimulatedOracle(corpus, index if index is not None else build_index(corpus), t_oracle)


@dataclass
class SessionState:
    config: SessionConfig
    budget: Budget
    labeled_now: dict[str, int]  # id -> label, insertion-ordered
    initial_labeled: set[str]
    rules_now: list[Rule]  # accepted rules, in acceptance order
    rejected_keys: set[tuple] = field(default_factory=set)
    rejected_rules: list[Rule] = field(default_factory=list)
    iteration: int = 0
    query_log: list[dict] = field(default_factory=list)
    terminated: bool = False
    termination_reason: str = ""
    # Runtime handles, rebuilt on resume and never serialized.
    sampler_state: SamplerState | None = None
    tree: object = None
    student: StudentModel | None = None
    teacher_output: TeacherOutput | None = None
    metrics: list[dict] = field(default_factory=list)

    def accepted_keys(self) -> set[tuple]:
        return {r.key() for r in self.rules_now}

    def next_timestamp(self) -> int:
        return len(self.query_log)


def initial_state(config: SessionConfig, corpus: Corpus, initial_rules: list[Rule] | None = None) -> SessionState:
    labeled = corpus.split_instances("labeled")
    if not labeled:
        raise ValueError("session requires a non-empty labeled split")
    if config.early_stop_patience and not corpus.split_instances("validation"):
        raise ValueError("early stopping requires a validation split")
    rules = [r.with_status("accepted") for r in (initial_rules or []) if r.status != "rejected"]
    return SessionState(
        config=config,
        budget=Budget(config.budget, config.cost_instance, config.cost_rule),
        labeled_now={inst.id: inst.gold_label for inst in labeled},
        initial_labeled={inst.id for inst in labeled},
        rules_now=rules,
    )


def _train_pair(
    state: SessionState, corpus: Corpus, student_seed: int
) -> tuple[TeacherOutput, StudentModel]:
    """Train the pair: teacher over the current rules, student on the joint
    objective with the teacher's soft labels as the weak term."""
    unlabeled = corpus.split_instances("unlabeled")
    matrix = build_label_matrix(state.rules_now, unlabeled)
    teacher_out = train_teacher(state.config.teacher, matrix, corpus.num_classes)
    labeled_ds = SoftDataset.from_gold(list(state.labeled_now.items()), corpus.num_classes)
    weak = SoftDataset.from_teacher(teacher_out, corpus.num_classes, exclude=set(state.labeled_now))
    student = train(corpus, labeled_ds, weak, state.config.student_hyper(student_seed))
    return teacher_out, student


def _pick_batch(
    state: SessionState,
    corpus: Corpus,
    soft: SoftDataset,
    batch_n: int,
    rng: np.random.Generator,
) -> list[str]:
    queried = state.sampler_state.queried if state.sampler_state else set()
    if state.config.sampler == "hierarchical":
        return select_batch(state.tree, state.sampler_state, soft, batch_n, rng)
    unqueried = [iid for iid in soft.ids if iid not in queried]
    if not unqueried:
        return []
    rows = {iid: row for iid, row in zip(soft.ids, soft.targets)}
    subset = SoftDataset(unqueried, np.array([rows[i] for i in unqueried]), soft.source)
    if state.config.sampler == "uncertainty":
        picked = uncertainty_select(subset, batch_n)
    else:
        picked = random_select(unqueried, batch_n, rng)
    for iid in picked:
        queried.add(iid)
    return picked


def run_iteration(
    state: SessionState,
    corpus: Corpus,
    index: FeatureIndex,
    oracle: Oracle,
    sampler_rng: np.random.Generator,
) -> SessionState:
    """One round: train the pair, pick a batch, query labels and rules,
    update state and budget. No-op with the termination flag set when the
    remaining budget cannot fund an instance query."""
    budget = state.budget
    if budget.remaining() < budget.cost_instance:
        state.terminated = True
        state.termination_reason = "budget exhausted"
        return state

    state.iteration += 1
    config = state.config
    teacher_out, student = _train_pair(
        state, corpus, derive_seed(config.seed, "student", state.iteration)
    )
    state.teacher_output = teacher_out
    state.student = student

    unlabeled = corpus.split_instances("unlabeled")
    soft = predict_proba(student, unlabeled)

    affordable = int(budget.remaining() // budget.cost_instance)
    batch_n = min(config.batch_size, affordable)
    if batch_n < 1:
        state.terminated = True
        state.termination_reason = "budget exhausted"
        return state
    picked = _pick_batch(state, corpus, soft, batch_n, sampler_rng)
    if not picked:
        state.terminated = True
        state.termination_reason = "unlabeled pool exhausted"
        return state

    oracle.begin_instance_batch([corpus.get(i) for i in picked])
    params = config.rulegen_params()
    for position, iid in enumerate(picked):
        if budget.remaining() < budget.cost_instance:
            # Rule costs starved the rest of the batch: the unqueried picks
            # go back to the pool uncharged.
            if state.sampler_state is not None:
                for leftover in picked[position:]:
                    state.sampler_state.queried.discard(leftover)
            break
        instance = corpus.get(iid)
        label = oracle.answer_instance(instance)
        budget.charge(budget.cost_instance)
        state.query_log.append(
            {
                "kind": "instance",
                "subject": iid,
                "answer": label,
                "cost": budget.cost_instance,
                "timestamp": state.next_timestamp(),
            }
        )
        state.labeled_now[iid] = label

        if params.beta == 0:
            continue
        existing = state.accepted_keys() | state.rejected_keys
        candidates = extract_candidates(instance, label, index, corpus, params, existing)
        selected = select_for_query(candidates, params, corpus, index)
        for rule in selected:
            if budget.remaining() < budget.cost_rule:
                break
            accepted = oracle.answer_rule(rule, instance)
            budget.charge(budget.cost_rule)
            state.query_log.append(
                {
                    "kind": "rule",
                    "subject": rule.id,
                    "predicate": [a.to_record() for a in sorted(rule.predicate)],
                    "label": rule.label,
                    "anchor": iid,
                    "answer": "accept" if accepted else "reject",
                    "cost": budget.cost_rule,
                    "timestamp": state.next_timestamp(),
                }
            )
            if accepted:
                state.rules_now.append(rule.with_status("accepted"))
            else:
                state.rejected_keys.add(rule.key())
                state.rejected_rules.append(rule.with_status("rejected"))
    return state


@dataclass
class SessionResult:
    student: StudentModel
    state: SessionState
    metrics: list[dict]


def _metrics_row(state: SessionState, corpus: Corpus, student: StudentModel) -> dict:
    test = corpus.split_instances("test")
    f1 = None
    if test:
        preds = predict_labels(student, test)
        f1 = macro_f1(preds, [i.gold_label for i in test], corpus.num_classes)
    return {
        "iteration": state.iteration,
        "test_macro_f1": f1,
        "labeled_size": len(state.labeled_now),
        "accepted_rules": len(state.rules_now),
        "spent": state.budget.spent,
    }


def run_session(
    config: SessionConfig,
    corpus: Corpus,
    oracle: Oracle,
    index: FeatureIndex | None = None,
    initial_rules: list[Rule] | None = None,
    state_observer=None,
) -> SessionResult:
    """The full loop: hierarchy built once, iterations until the budget
    cannot fund another instance query, then one final retrain.

    state_observer, when given, is called once with the live SessionState
    so a serving layer can snapshot progress between oracle calls."""
    if index is None:
        index = build_index(corpus)
    state = initial_state(config, corpus, initial_rules)
    if state_observer is not None:
        state_observer(state)
    unlabeled = corpus.split_instances("unlabeled")

    will_iterate = state.budget.remaining() >= config.cost_instance and bool(unlabeled)
    if will_iterate and config.sampler == "hierarchical":
        if len(unlabeled) < 2:
            raise ValueError("hierarchical sampler needs at least 2 unlabeled instances")
        state.tree = build_hierarchy(
            [i.id for i in unlabeled], np.array([i.embedding for i in unlabeled])
        )
        state.sampler_state = SamplerState.for_tree(state.tree)
    else:
        state.sampler_state = SamplerState(cluster_members=[])
    sampler_rng = derive_rng(config.seed, "sampler")

    while not state.terminated and state.budget.remaining() >= state.budget.cost_instance:
        run_iteration(state, corpus, index, oracle, sampler_rng)
        if state.terminated:
            break
        state.metrics.append(_metrics_row(state, corpus, state.student))

    if not state.terminated:
        state.terminated = True
        state.termination_reason = "budget exhausted"

    teacher_out, student = _train_pair(
        state, corpus, derive_seed(config.seed, "student", state.iteration + 1)
    )
    state.teacher_output = teacher_out
    state.student = student
    final_row = _metrics_row(state, corpus, student)
    final_row["final"] = True
    state.metrics.append(final_row)
    return SessionResult(student=student, state=state, metrics=state.metrics)


def run_active_learning(config: SessionConfig, corpus: Corpus) -> tuple[list[str], StudentModel, list[dict]]:
    """Standalone hierarchical active learning: instance queries only, no
    teacher and no rule mining. Kept as its own code path so the beta=0
    session can be checked against it query-for-query."""
    labeled = corpus.split_instances("labeled")
    if not labeled:
        raise ValueError("active learning requires a non-empty labeled split")
    unlabeled = corpus.split_instances("unlabeled")
    if len(unlabeled) < 2:
        raise ValueError("need at least 2 unlabeled instances")

    tree = build_hierarchy([i.id for i in unlabeled], np.array([i.embedding for i in unlabeled]))
    sampler_state = SamplerState.for_tree(tree)
    sampler_rng = derive_rng(config.seed, "sampler")

    labeled_now = {inst.id: inst.gold_label for inst in labeled}
    spent = 0.0
    iteration = 0
    queries: list[str] = []
    metrics: list[dict] = []
    empty_weak = SoftDataset.empty(corpus.num_classes)

    def train_student(seed_iteration: int) -> StudentModel:
        labeled_ds = SoftDataset.from_gold(list(labeled_now.items()), corpus.num_classes)
        return train(
            corpus, labeled_ds, empty_weak,
            config.student_hyper(derive_seed(config.seed, "student", seed_iteration)),
        )

    while config.budget - spent >= config.cost_instance:
        iteration += 1
        student = train_student(iteration)
        soft = predict_proba(student, unlabeled)
        affordable = int((config.budget - spent) // config.cost_instance)
        batch_n = min(config.batch_size, affordable)
        picked = select_batch(tree, sampler_state, soft, batch_n, sampler_rng)
        if not picked:
            break
        for iid in picked:
            labeled_now[iid] = corpus.get(iid).gold_label
            spent += config.cost_instance
            queries.append(iid)
        test = corpus.split_instances("test")
        if test:
            preds = predict_labels(student, test)
            metrics.append(
                {
                    "iteration": iteration,
                    "test_macro_f1": macro_f1(preds, [i.gold_label for i in test], corpus.num_classes),
                    "labeled_size": len(labeled_now),
                    "spent": spent,
                }
            )

    final = train_student(iteration + 1)
    return queries, final, metrics


def replay_query_log(
    config: SessionConfig,
    corpus: Corpus,
    log: list[dict],
    initial_rules: list[Rule] | None = None,
) -> SessionState:
    """Rebuild final state from the initial state plus the query log."""
    state = initial_state(config, corpus, initial_rules)
    for entry in log:
        if entry["kind"] == "instance":
            state.labeled_now[entry["subject"]] = entry["answer"]
            state.budget.charge(entry["cost"])
        elif entry["kind"] == "rule":
            predicate = frozenset(
                FeatureAtom.make(obj["kind"], obj["value"]) for obj in entry["predicate"]
            )
            rule = Rule(
                id=entry["subject"],
                predicate=predicate,
                label=entry["label"],
                source="mined",
                status="candidate",
            )
            state.budget.charge(entry["cost"])
            if entry["answer"] == "accept":
                state.rules_now.append(rule.with_status("accepted"))
            else:
                state.rejected_keys.add(rule.key())
                state.rejected_rules.append(rule.with_status("rejected"))
        else:
            raise ValueError(f"unknown log entry kind {entry['kind']!r}")
        state.query_log.append(dict(entry))
    return state


def write_session_artifacts(result: SessionResult, out_dir: str | Path) -> None:
    """Run artifact directory: config echo, query log, metrics history,
    final model, final rules."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(result.state.config.to_dict(), fh, indent=2)
        fh.write("\n")
    with open(out / "query_log.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.state.query_log:
            fh.write(json.dumps(entry, ensure_ascii=False))
            fh.write("\n")
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for row in result.metrics:
            fh.write(json.dumps(row, ensure_ascii=False))
            fh.write("\n")
    save_model(result.student, out / "model.json")
    save_rules(result.state.rules_now + result.state.rejected_rules, out / "rules.jsonl")
