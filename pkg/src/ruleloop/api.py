"""Service surface for live sessions: pending expert queries out, answers
in, state snapshots for the polling UI.

A live session runs the same engine loop as simulation, against an oracle
that blocks on a human answer. Every answer is appended to a durable log
before it is acknowledged, and a restarted server resumes by re-running the
deterministic loop while feeding it the recorded answers; the pending
queries regenerate identically, so no acknowledged answer is ever lost.
"""

from __future__ import annotations

import json
import os
import re
import threading
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .corpus import Corpus
from .features import FeatureIndex
from .rules import Rule, compute_stats, dumps_rules, rule_to_record
from .session import Oracle, SessionConfig, run_session, write_session_artifacts

ANSWER_WAIT_TIMEOUT = 60.0  # seconds for the engine to quiesce after an answer


class ApiError(Exception):
    def __init__(self, code: str, message: str, http_status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.http_status = http_status


@dataclass
class RegisteredCorpus:
    name: str
    corpus: Corpus
    index: FeatureIndex
    initial_rules: list[Rule]

    def info(self) -> dict:
        splits = {
            split: len(self.corpus.split_ids(split))
            for split in ("labeled", "unlabeled", "validation", "test")
        }
        return {
            "name": self.name,
            "num_classes": self.corpus.num_classes,
            "class_names": self.corpus.class_names,
            "splits": splits,
        }


class LiveOracle(Oracle):
    """Oracle that publishes pending queries and blocks until answered.

    During recovery the recorded answers are consumed without blocking, so
    the deterministic engine loop fast-forwards to the first unanswered
    query.
    """

    def __init__(self, session: "LiveSession"):
        self.session = session

    def begin_instance_batch(self, instances) -> None:
        with self.session.cond:
            self.session.instance_qids = {}
            for inst in instances:
                qid = self.session.publish(
                    {"kind": "instance", "instance_id": inst.id, "text": inst.text}
                )
                self.session.instance_qids[inst.id] = qid
            self.session.persist_pending()

    def answer_instance(self, instance) -> int:
        qid = self.session.query_id_for_instance(instance.id)
        return int(self.session.await_answer(qid))

    def answer_rule(self, rule: Rule, context) -> bool:
        session = self.session
        stats = compute_stats(rule, session.registered.corpus, session.registered.index)
        with session.cond:
            qid = session.publish(
                {
                    "kind": "rule",
                    "rule_id": rule.id,
                    "predicate": [a.to_record() for a in sorted(rule.predicate)],
                    "label": rule.label,
                    "label_name": session.registered.corpus.class_names[rule.label - 1],
                    "anchor_id": context.id,
                    "anchor_text": context.text,
                    "precision_labeled": stats.precision_labeled,
                    "coverage_unlabeled": stats.coverage_unlabeled,
                }
            )
            session.persist_pending()
        return session.await_answer(qid) == "accept"


class LiveSession:
    """One interactive session: engine thread, pending queries, durable
    answer log, and artifact directory."""

    def __init__(
        self,
        session_id: str,
        directory: Path,
        config: SessionConfig,
        registered: RegisteredCorpus,
    ):
        self.session_id = session_id
        self.directory = directory
        self.config = config
        self.registered = registered

        self.cond = threading.Condition()
        self.pending: dict[str, dict] = {}
        self.instance_qids: dict[str, str] = {}  # current batch: instance id -> qid
        self.answers: dict[str, object] = {}
        self.recorded: dict[str, object] = {}
        self.query_seq = 0
        self.status = "running"  # running | waiting | finished | failed
        self.waiting_qid: str | None = None
        self.termination_reason = ""
        self.error: str | None = None
        self.engine_state = None
        self.result = None

        self.directory.mkdir(parents=True, exist_ok=True)
        self._load_recorded_answers()
        self.answers.update(self.recorded)
        self.thread = threading.Thread(target=self._run, daemon=True)

    # -- engine side ----------------------------------------------------

    def start(self) -> None:
        self.thread.start()

    def _run(self) -> None:
        oracle = LiveOracle(self)
        try:
            result = run_session(
                self.config,
                self.registered.corpus,
                oracle,
                self.registered.index,
                self.registered.initial_rules,
                state_observer=self._observe_state,
            )
            with self.cond:
                self.result = result
                self.status = "finished"
                self.termination_reason = result.state.termination_reason
                self.pending.clear()
                self.persist_pending()
                self.cond.notify_all()
            write_session_artifacts(result, self.directory)
            self._write_status()
        except Exception as exc:  # surface engine failures to clients
            with self.cond:
                self.status = "failed"
                self.error = str(exc)
                self.pending.clear()
                self.cond.notify_all()
            self._write_status()

    def _observe_state(self, state) -> None:
        with self.cond:
            self.engine_state = state

    def publish(self, payload: dict) -> str:
        qid = f"q{self.query_seq:05d}"
        self.query_seq += 1
        entry = {"query_id": qid, "issued_at": self.query_seq, **payload}
        if qid not in self.answers:  # recorded answers stay non-pending on resume
            self.pending[qid] = entry
        return qid

    def query_id_for_instance(self, instance_id: str) -> str:
        with self.cond:
            qid = self.instance_qids.get(instance_id)
            if qid is None:
                raise RuntimeError(f"instance {instance_id!r} was never published")
            return qid

    def await_answer(self, qid: str):
        with self.cond:
            self.waiting_qid = qid
            if qid not in self.answers:
                self.status = "waiting"
                self.cond.notify_all()
                while qid not in self.answers:
                    self.cond.wait()
            answer = self.answers[qid]
            self.pending.pop(qid, None)
            self.persist_pending()
            self.status = "running"
            self.waiting_qid = None
            self.cond.notify_all()
            return answer

    # -- durability -----------------------------------------------------

    @property
    def answers_path(self) -> Path:
        return self.directory / "answers.jsonl"

    def _load_recorded_answers(self) -> None:
        if not self.answers_path.exists():
            return
        with open(self.answers_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail write from a crash
                self.recorded[record["query_id"]] = record["answer"]

    def _record_answer(self, qid: str, answer) -> None:
        with open(self.answers_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"query_id": qid, "answer": answer}))
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())

    def persist_pending(self) -> None:
        tmp = self.directory / "pending.json.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(list(self.pending.values()), fh)
        tmp.replace(self.directory / "pending.json")

    def _write_status(self) -> None:
        with open(self.directory / "status.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "status": self.status,
                    "termination_reason": self.termination_reason,
                    "error": self.error,
                },
                fh,
            )

    # -- client side ----------------------------------------------------

    def status_label(self) -> str:
        if self.status == "finished":
            return f"terminated: {self.termination_reason or 'budget exhausted'}"
        if self.status == "failed":
            return f"failed: {self.error}"
        return self.status

    def next_queries(self) -> dict:
        with self.cond:
            return {
                "status": self.status_label(),
                "pending": sorted(self.pending.values(), key=lambda e: e["query_id"]),
            }

    def snapshot(self) -> dict:
        with self.cond:
            state = self.engine_state
            snap = {
                "session_id": self.session_id,
                "status": self.status_label(),
                "pending_count": len(self.pending),
            }
            if state is not None:
                snap.update(
                    {
                        "budget": {
                            "total": state.budget.total,
                            "spent": state.budget.spent,
                            "remaining": state.budget.remaining(),
                            "cost_instance": state.budget.cost_instance,
                            "cost_rule": state.budget.cost_rule,
                        },
                        "labeled_size": len(state.labeled_now),
                        "initial_labeled": len(state.initial_labeled),
                        "accepted_rules": len(state.rules_now),
                        "rejected_rules": len(state.rejected_rules),
                        "iteration": state.iteration,
                        "metrics": list(state.metrics),
                    }
                )
            return snap

    def submit_answer(self, qid: str, answer) -> dict:
        with self.cond:
            if self.status in ("finished", "failed"):
                raise ApiError("terminated", "session is no longer accepting answers", 409)
            if qid in self.answers:
                if self.answers[qid] == answer:
                    return self._quiesce_and_snapshot()
                raise ApiError("conflict", f"query {qid} already answered differently", 409)
            entry = self.pending.get(qid)
            if entry is None:
                raise ApiError("unknown_query", f"no pending query {qid}", 404)
            answer = self._validate_answer(entry, answer)
            self._record_answer(qid, answer)  # durable before acknowledgment
            self.answers[qid] = answer
            # Answered cards stop being pending even before the engine
            # consumes them (it may still be blocked on an earlier query).
            self.pending.pop(qid, None)
            self.persist_pending()
            self.cond.notify_all()
            return self._quiesce_and_snapshot()

    def _validate_answer(self, entry: dict, answer):
        if entry["kind"] == "instance":
            if not isinstance(answer, int) or isinstance(answer, bool):
                raise ApiError("type_mismatch", "instance queries take a class index", 422)
            if not 1 <= answer <= self.registered.corpus.num_classes:
                raise ApiError("type_mismatch", f"class index {answer} out of range", 422)
            return answer
        if answer not in ("accept", "reject"):
            raise ApiError("type_mismatch", "rule queries take accept or reject", 422)
        return answer

    def _quiesce_and_snapshot(self) -> dict:
        # Wait until the engine is blocked on an unanswered query (or done),
        # so the snapshot reflects everything this answer unlocked.
        deadline = ANSWER_WAIT_TIMEOUT
        while not (
            self.status in ("finished", "failed")
            or (self.status == "waiting" and self.waiting_qid not in self.answers)
        ):
            if not self.cond.wait(timeout=0.5):
                deadline -= 0.5
                if deadline <= 0:
                    raise ApiError("engine_stalled", "session engine did not settle", 504)
        snap = self.snapshot()
        snap["terminal"] = self.status in ("finished", "failed")
        return snap

    def rules_listing(self) -> list[dict]:
        with self.cond:
            state = self.engine_state
            if state is None:
                return []
            rows = []
            for rule in list(state.rules_now) + list(state.rejected_rules):
                stats = compute_stats(rule, self.registered.corpus, self.registered.index)
                record = rule_to_record(rule)
                record["coverage_unlabeled"] = stats.coverage_unlabeled
                record["precision_labeled"] = stats.precision_labeled
                rows.append(record)
            return rows

    def export_rules_bytes(self) -> bytes:
        artifact = self.directory / "rules.jsonl"
        if artifact.exists():
            return artifact.read_bytes()
        with self.cond:
            state = self.engine_state
            rules = (list(state.rules_now) + list(state.rejected_rules)) if state else []
        return dumps_rules(rules).encode("utf-8")


class SessionManager:
    """Registry of corpora and sessions, persisted under an artifact root."""

    def __init__(self, artifact_root: str | Path):
        self.root = Path(artifact_root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.corpora: dict[str, RegisteredCorpus] = {}
        self.sessions: dict[str, LiveSession] = {}
        self._lock = threading.Lock()
        self._idempotency: dict[str, str] = {}
        self._load_idempotency()

    def register_corpus(
        self,
        name: str,
        corpus: Corpus,
        index: FeatureIndex,
        initial_rules: list[Rule] | None = None,
    ) -> None:
        self.corpora[name] = RegisteredCorpus(name, corpus, index, initial_rules or [])

    def _load_idempotency(self) -> None:
        path = self.root / "idempotency.json"
        if path.exists():
            self._idempotency = json.loads(path.read_text())

    def _save_idempotency(self) -> None:
        (self.root / "idempotency.json").write_text(json.dumps(self._idempotency))

    def create_session(
        self, corpus_name: str, config_data: dict | None = None, idempotency_key: str | None = None
    ) -> str:
        with self._lock:
            if idempotency_key and idempotency_key in self._idempotency:
                return self._idempotency[idempotency_key]
            registered = self.corpora.get(corpus_name)
            if registered is None:
                raise ApiError("unknown_corpus", f"corpus {corpus_name!r} not registered", 404)
            try:
                config = SessionConfig.from_dict(config_data or {})
            except (ValueError, TypeError) as exc:
                raise ApiError("invalid_config", str(exc), 422) from None

            session_id = uuid.uuid4().hex[:12]
            directory = self.sessions_dir / session_id
            directory.mkdir(parents=True)
            with open(directory / "session.json", "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "session_id": session_id,
                        "corpus": corpus_name,
                        "config": config.to_dict(),
                    },
                    fh,
                )
            session = LiveSession(session_id, directory, config, registered)
            self.sessions[session_id] = session
            if idempotency_key:
                self._idempotency[idempotency_key] = session_id
                self._save_idempotency()
            session.start()
            return session_id

    def recover_sessions(self) -> list[str]:
        """Resume every unfinished persisted session by deterministic replay
        of its recorded answers."""
        resumed = []
        for directory in sorted(self.sessions_dir.iterdir()):
            meta_path = directory / "session.json"
            if not meta_path.is_file():
                continue
            meta = json.loads(meta_path.read_text())
            session_id = meta["session_id"]
            if session_id in self.sessions:
                continue
            status_path = directory / "status.json"
            if status_path.exists() and json.loads(status_path.read_text())["status"] in (
                "finished",
                "failed",
            ):
                continue
            registered = self.corpora.get(meta["corpus"])
            if registered is None:
                continue  # corpus not mounted on this server
            config = SessionConfig.from_dict(meta["config"])
            session = LiveSession(session_id, directory, config, registered)
            self.sessions[session_id] = session
            session.start()
            resumed.append(session_id)
        return resumed

    def get(self, session_id: str) -> LiveSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError("unknown_session", f"no session {session_id!r}", 404)
        return session

    def session_info(self, session_id: str) -> dict:
        session = self.get(session_id)
        return {
            "session_id": session.session_id,
            "corpus": session.registered.name,
            "config": session.config.to_dict(),
            "class_names": session.registered.corpus.class_names,
            "status": session.status_label(),
        }


ROUTES = [
    ("GET", re.compile(r"^/health$"), "health"),
    ("GET", re.compile(r"^/corpora$"), "corpora"),
    ("POST", re.compile(r"^/sessions$"), "create_session"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/queries$"), "queries"),
    ("POST", re.compile(r"^/sessions/(?P<sid>[^/]+)/answers$"), "answer"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/state$"), "state"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/rules$"), "rules"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/artifacts/(?P<name>[\w.]+)$"), "export_artifact"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)$"), "session_info"),
]

EXPORTABLE_ARTIFACTS = {
    "rules.jsonl",
    "query_log.jsonl",
    "metrics.jsonl",
    "model.json",
    "config.json",
}

STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


def make_handler(manager: SessionManager, static_dir: Path | None = None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # quiet by default
            pass

        def _send_json(self, payload, status=200):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error(self, exc: ApiError):
            self._send_json(
                {"error": {"code": exc.code, "message": exc.message}}, exc.http_status
            )

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return {}
            try:
                return json.loads(self.rfile.read(length))
            except json.JSONDecodeError:
                raise ApiError("bad_request", "request body is not valid JSON", 400) from None

        def _dispatch(self, method: str):
            for verb, pattern, name in ROUTES:
                if verb != method:
                    continue
                match = pattern.match(self.path)
                if match:
                    try:
                        getattr(self, f"_do_{name}")(**match.groupdict())
                    except ApiError as exc:
                        self._send_error(exc)
                    except BrokenPipeError:
                        pass
                    return
            if method == "GET" and static_dir is not None and self._try_static():
                return
            self._send_error(ApiError("not_found", f"no route for {method} {self.path}", 404))

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def _try_static(self) -> bool:
            rel = self.path.lstrip("/") or "index.html"
            target = (static_dir / rel).resolve()
            if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
                return False
            body = target.read_bytes()
            self.send_response(200)
            self.send_header(
                "Content-Type", STATIC_TYPES.get(target.suffix, "application/octet-stream")
            )
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return True

        def _do_health(self):
            self._send_json({"status": "ok"})

        def _do_corpora(self):
            self._send_json({"corpora": [r.info() for r in manager.corpora.values()]})

        def _do_create_session(self):
            body = self._read_body()
            if "corpus" not in body:
                raise ApiError("bad_request", "field 'corpus' is required", 422)
            session_id = manager.create_session(
                body["corpus"], body.get("config"), body.get("idempotency_key")
            )
            self._send_json({"session_id": session_id}, 201)

        def _do_queries(self, sid):
            self._send_json(manager.get(sid).next_queries())

        def _do_answer(self, sid):
            body = self._read_body()
            for field_name in ("query_id", "answer"):
                if field_name not in body:
                    raise ApiError("bad_request", f"field {field_name!r} is required", 422)
            self._send_json(manager.get(sid).submit_answer(body["query_id"], body["answer"]))

        def _do_state(self, sid):
            self._send_json(manager.get(sid).snapshot())

        def _do_rules(self, sid):
            self._send_json({"rules": manager.get(sid).rules_listing()})

        def _do_export_artifact(self, sid, name):
            session = manager.get(sid)
            if name == "rules.jsonl":
                data = session.export_rules_bytes()
            elif name in EXPORTABLE_ARTIFACTS:
                path = session.directory / name
                if not path.exists():
                    raise ApiError("not_found", f"artifact {name} not written yet", 404)
                data = path.read_bytes()
            else:
                raise ApiError("not_found", f"unknown artifact {name}", 404)
            self.send_response(200)
            self.send_header("Content-Type", "application/jsonl")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _do_session_info(self, sid):
            self._send_json(manager.session_info(sid))

    return Handler


def serve(
    manager: SessionManager,
    port: int,
    host: str = "127.0.0.1",
    static_dir: Path | None = None,
) -> ThreadingHTTPServer:
    """Build the HTTP server (caller drives serve_forever/shutdown)."""
    handler = make_handler(manager, static_dir)
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server
