"""In-process job registry and worker pool behind the HTTP service.

Each submitted layout becomes an immutable job directory produced by one
worker; job state advances monotonically (queued, running stage 1,
running stage 2, then done or failed) and is observable mid-run.
Regeneration never mutates a finished job — it submits a new job that
reuses the source job's stage-1 artifacts.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import EngineConfig, load_config
from .engine import JobPaths, build_backends, new_job_id, regenerate_object, run_layout
from .errors import EngineError, ValidationError
from .layout import Layout, load_layout

_STATE_RANK = {"queued": 0, "running:sog": 1, "running:cc": 2, "done": 3, "failed": 3}


def error_payload(exc: Exception) -> dict:
    """Uniform {code, stage, message} error shape for records and HTTP bodies."""
    code = "".join(
        "_" + c.lower() if c.isupper() else c for c in type(exc).__name__
    ).lstrip("_")
    return {
        "code": code,
        "stage": getattr(exc, "stage", None) or "",
        "message": str(exc),
    }


@dataclass
class JobRecord:
    """Mutable view of one job's lifecycle; snapshot via to_dict()."""

    job_id: str
    state: str = "queued"
    objects: dict[str, str] = field(default_factory=dict)
    error: dict | None = None
    job_dir: str | None = None
    source_job_id: str | None = None

    def to_dict(self) -> dict:
        out = {
            "job_id": self.job_id,
            "state": self.state,
            "objects": dict(self.objects),
            "error": self.error,
            "job_dir": self.job_dir,
        }
        if self.source_job_id is not None:
            out["source_job_id"] = self.source_job_id
        return out


class JobManager:
    """Thread-pool scheduler sized by the backends' concurrency contract."""

    def __init__(
        self,
        config: EngineConfig | None = None,
        out_root: str | Path | None = None,
        max_workers: int | None = None,
    ):
        self.config = config if config is not None else load_config()
        self.out_root = Path(out_root if out_root is not None else self.config.output_dir)
        schedule = self.config.make_schedule()
        self.backends = build_backends(self.config, schedule)
        if max_workers is None:
            max_workers = 4 if self.backends.concurrent_safe else 1
        self._pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="job")
        self._lock = threading.Lock()
        self._records: dict[str, JobRecord] = {}
        self._configs: dict[str, EngineConfig] = {}

    # -- state bookkeeping -------------------------------------------------

    def _advance(self, record: JobRecord, state: str, obj: str = "") -> None:
        with self._lock:
            if _STATE_RANK[state] < _STATE_RANK[record.state]:
                raise RuntimeError(f"job state may not regress: {record.state} -> {state}")
            record.state = state
            if state == "running:sog" and obj:
                record.objects[obj] = "running"
            elif state in ("running:cc", "done"):
                for key in record.objects:
                    record.objects[key] = "done"

    def get(self, job_id: str) -> JobRecord:
        with self._lock:
            record = self._records.get(job_id)
        if record is None:
            raise KeyError(job_id)
        return record

    def paths(self, job_id: str) -> JobPaths:
        record = self.get(job_id)
        if record.job_dir is None:
            raise KeyError(job_id)
        return JobPaths(Path(record.job_dir))

    # -- submission --------------------------------------------------------

    def _job_config(self, overrides: dict | None) -> EngineConfig:
        if not overrides:
            return self.config
        return load_config(self.config.data, overrides=overrides)

    def submit_layout(self, document: bytes | str | dict | Layout, overrides: dict | None = None) -> str:
        """Queue a full two-stage run; returns the new job id immediately."""
        if isinstance(document, Layout):
            layout = document
        elif isinstance(document, dict):
            layout = load_layout(json.dumps(document))
        else:
            layout = load_layout(document)
        config = self._job_config(overrides)
        job_id = new_job_id()
        record = JobRecord(
            job_id=job_id,
            objects={o.id: "pending" for o in layout.objects},
            job_dir=str(self.out_root / job_id),
        )
        with self._lock:
            self._records[job_id] = record
            self._configs[job_id] = config

        def work() -> None:
            try:
                run_layout(
                    layout, config, self.out_root,
                    job_id=job_id, backends=self.backends,
                    progress=lambda stage, detail="": self._advance(record, stage, detail),
                )
            except Exception as exc:
                with self._lock:
                    record.state = "failed"
                    record.error = error_payload(exc)

        self._pool.submit(work)
        return job_id

    def regenerate(self, job_id: str, object_id: str, seed: int | None = None) -> str:
        """Queue a one-object rerun + recompose as a new job."""
        source = self.get(job_id)
        if source.state != "done":
            raise ValidationError(f"job {job_id} is {source.state}; regeneration needs a finished job")
        if object_id not in source.objects:
            raise KeyError(object_id)
        source_dir = source.job_dir
        config = self._configs.get(job_id, self.config)
        new_id = new_job_id()
        record = JobRecord(
            job_id=new_id,
            objects={k: "pending" for k in source.objects},
            source_job_id=job_id,
            job_dir=str(self.out_root / new_id),
        )
        with self._lock:
            self._records[new_id] = record
            self._configs[new_id] = config

        def work() -> None:
            try:
                regenerate_object(
                    source_dir, object_id, config, self.out_root,
                    new_seed=seed, job_id=new_id, backends=self.backends,
                    progress=lambda stage, detail="": self._advance(record, stage, detail),
                )
            except Exception as exc:
                with self._lock:
                    record.state = "failed"
                    record.error = error_payload(exc)

        self._pool.submit(work)
        return new_id

    def wait(self, job_id: str, timeout: float = 60.0, poll: float = 0.02) -> JobRecord:
        """Block until the job reaches a terminal state (testing convenience)."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            record = self.get(job_id)
            if record.state in ("done", "failed"):
                return record
            time.sleep(poll)
        raise TimeoutError(f"job {job_id} still {self.get(job_id).state} after {timeout}s")

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)


__all__ = ["JobManager", "JobRecord", "error_payload", "EngineError"]
