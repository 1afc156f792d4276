"""Process-isolated game runner: referee and worker over local sockets.

The referee samples the hat string and serves one worker per contiguous
player block.  A worker only ever receives, for player j, the bit string of
hats at indices strictly greater than j, so the no-communication rule is
enforced by the transport topology, not by convention.

Wire format: one JSON object per newline-terminated UTF-8 line with a
``type`` field.

    worker  -> {"type": "hello", "version": 1}
    referee -> {"type": "welcome", "version": 1, "horizon": H, "n": N,
                "players": [lo, hi], "latent_seed": L, "guess_seed": G,
                "worker_seed": W, "checkpoints": [...]}
    referee -> {"type": "assign", "player": j, "visible": "0101..."}
    worker  -> {"type": "guess", "player": j, "bit": 0}
    referee -> {"type": "result", "player": j, "r": 1}
    referee -> {"type": "done", "summary": {...}}

Every worker receives the same run-level latent seed, so mixture strategies
sample one flip index per run no matter how players are partitioned; the
per-worker seed is derived from the run key and the worker id and is reserved
for strategies needing worker-local randomness.  Guesses for the "random"
strategy come from the shared guess stream indexed by player, which keeps a
harness run bit-identical to the in-process simulator.
"""

from __future__ import annotations

import json
import socket
import threading
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError, HarnessAbort, ProtocolError
from .hatgame import (
    InputSampler,
    RunStats,
    StrategySpec,
    bind_strategy,
    parse_sampler,
    parse_strategy,
    sample_input,
    win_ratio,
)
from .rng import (
    STREAM_GUESS,
    STREAM_INPUT,
    STREAM_LATENT,
    STREAM_WORKER,
    derive_key,
)

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 10.0


def encode_line(obj: dict) -> bytes:
    return (json.dumps(obj, separators=(",", ":"), sort_keys=True) + "\n").encode("utf-8")


def decode_line(line: bytes) -> dict:
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed wire line: {exc}") from exc
    if not isinstance(obj, dict) or "type" not in obj:
        raise ProtocolError("wire messages must be objects with a 'type'")
    return obj


class _LineChannel:
    """Blocking line-oriented channel over a connected socket."""

    def __init__(self, sock: socket.socket, timeout: float):
        sock.settimeout(timeout)
        self.sock = sock
        self.reader = sock.makefile("rb")

    def send(self, obj: dict) -> None:
        self.sock.sendall(encode_line(obj))

    def recv(self) -> dict:
        line = self.reader.readline()
        if not line:
            raise ProtocolError("peer closed the connection")
        return decode_line(line)

    def close(self) -> None:
        try:
            self.reader.close()
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


@dataclass
class RefereeConfig:
    n: int
    horizon: int | None = None
    sampler: InputSampler | str = "uniform"
    seed: int = 0
    trial: int = 0
    block_size: int | None = None
    host: str = "127.0.0.1"
    port: int = 0
    timeout: float = DEFAULT_TIMEOUT
    checkpoints: tuple = ()

    def __post_init__(self):
        if isinstance(self.sampler, str):
            self.sampler = parse_sampler(self.sampler)
        if self.horizon is None:
            self.horizon = self.n
        if self.n < 1 or self.n > self.horizon:
            raise ConfigError("need 1 <= players <= horizon")
        if self.block_size is None:
            self.block_size = self.n
        if self.block_size < 1:
            raise ConfigError("block size must be >= 1")


@dataclass
class _WorkerRecord:
    worker_id: int
    lo: int
    hi: int
    channel: _LineChannel
    guesses: dict = field(default_factory=dict)
    error: str | None = None


class Referee:
    """Serves one run; bind happens at construction so the port is known."""

    def __init__(self, config: RefereeConfig):
        self.config = config
        self.listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.listener.bind((config.host, config.port))
        self.listener.listen(64)
        self.listener.settimeout(config.timeout)
        self.errors: list[str] = []

    @property
    def port(self) -> int:
        return self.listener.getsockname()[1]

    def _blocks(self) -> list[tuple[int, int]]:
        cfg = self.config
        return [(lo, min(cfg.n, lo + cfg.block_size))
                for lo in range(0, cfg.n, cfg.block_size)]

    def run(self) -> RunStats:
        """Accept workers, play the run, and score it.

        Raises HarnessAbort on worker timeout or protocol violation, with the
        partial transcript of collected guesses attached.
        """
        cfg = self.config
        run_key = derive_key(cfg.seed, cfg.trial)
        input_key = derive_key(run_key, STREAM_INPUT)
        latent_seed = derive_key(run_key, STREAM_LATENT)
        guess_seed = derive_key(run_key, STREAM_GUESS)
        hat = sample_input(cfg.sampler, cfg.horizon, seed=input_key)
        blocks = self._blocks()
        workers: list[_WorkerRecord] = []
        try:
            for worker_id, (lo, hi) in enumerate(blocks):
                try:
                    sock, _ = self.listener.accept()
                except socket.timeout:
                    raise HarnessAbort(
                        f"timed out waiting for worker {worker_id}",
                        partial=None, errors=self.errors)
                channel = _LineChannel(sock, cfg.timeout)
                record = _WorkerRecord(worker_id, lo, hi, channel)
                workers.append(record)
                self._handshake(record, latent_seed, guess_seed, run_key)
            threads = [threading.Thread(target=self._serve_block,
                                        args=(record, hat), daemon=True)
                       for record in workers]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            failures = [w for w in workers if w.error is not None]
            if failures:
                partial = {j: bit for w in workers for j, bit in w.guesses.items()}
                self.errors.extend(w.error for w in failures)
                raise HarnessAbort(
                    f"run aborted: {failures[0].error}",
                    partial=partial, errors=self.errors)
            stats = self._score(workers, hat)
            summary = stats.to_json()
            for w in workers:
                for j in sorted(w.guesses):
                    r = 1 if w.guesses[j] == int(hat.bits[j]) else 0
                    w.channel.send({"type": "result", "player": j, "r": r})
                w.channel.send({"type": "done", "summary": summary})
            return stats
        finally:
            for w in workers:
                w.channel.close()
            self.listener.close()

    def _handshake(self, record: _WorkerRecord, latent_seed: int,
                   guess_seed: int, run_key: int) -> None:
        cfg = self.config
        try:
            hello = record.channel.recv()
        except (ProtocolError, socket.timeout) as exc:
            raise HarnessAbort(f"worker {record.worker_id} handshake failed: {exc}",
                               errors=self.errors) from exc
        if hello.get("type") != "hello" or hello.get("version") != PROTOCOL_VERSION:
            raise HarnessAbort(f"worker {record.worker_id} sent a bad hello",
                               errors=self.errors)
        record.channel.send({
            "type": "welcome", "version": PROTOCOL_VERSION,
            "horizon": cfg.horizon, "n": cfg.n,
            "players": [record.lo, record.hi],
            "latent_seed": latent_seed, "guess_seed": guess_seed,
            "worker_seed": derive_key(run_key, STREAM_WORKER, record.worker_id),
            "checkpoints": [int(k) for k in cfg.checkpoints],
        })

    def _serve_block(self, record: _WorkerRecord, hat) -> None:
        """Lock-step assign/guess exchange for one worker's player range.

        The visible field for player j is exactly bits j+1 .. horizon-1; no
        other part of the hat string ever crosses this connection.
        """
        try:
            for j in range(record.lo, record.hi):
                visible = "".join(
                    "1" if b else "0"
                    for b in hat.bits[j + 1:self.config.horizon])
                record.channel.send({"type": "assign", "player": j,
                                     "visible": visible})
                reply = record.channel.recv()
                if reply.get("type") != "guess":
                    raise ProtocolError(
                        f"expected a guess, got {reply.get('type')!r}")
                if reply.get("player") != j:
                    raise ProtocolError(
                        f"guess for player {reply.get('player')!r}, "
                        f"expected {j}")
                bit = reply.get("bit")
                if bit not in (0, 1):
                    raise ProtocolError(f"guess bit must be 0 or 1, got {bit!r}")
                record.guesses[j] = bit
        except (ProtocolError, socket.timeout, OSError) as exc:
            record.error = f"worker {record.worker_id}: {exc}"
            record.channel.close()

    def _score(self, workers: list[_WorkerRecord], hat) -> RunStats:
        cfg = self.config
        guesses = np.zeros(cfg.n, dtype=np.uint8)
        for w in workers:
            for j, bit in w.guesses.items():
                guesses[j] = bit
        results = (guesses == hat.bits[:cfg.n]).view(np.uint8)
        wins = int(results.sum())
        losses = np.flatnonzero(results == 0)
        last_loss = int(losses[-1]) if losses.size else None
        s_sum = 2 * wins - cfg.n
        marks = []
        if cfg.checkpoints:
            cum = np.cumsum(2 * results.astype(np.int64) - 1)
            for k in sorted(set(int(k) for k in cfg.checkpoints)):
                marks.append((k, int(cum[k - 1])))
        return RunStats(n=cfg.n, wins=wins, s_sum=s_sum,
                        win_ratio=win_ratio(s_sum, cfg.n),
                        last_loss=last_loss, checkpoints=tuple(marks),
                        latent_index=None)


def referee_serve(config: RefereeConfig) -> RunStats:
    return Referee(config).run()


def worker_run(strategy: StrategySpec | str, host: str, port: int,
               seed: int | None = None, timeout: float = DEFAULT_TIMEOUT) -> int:
    """Connect to a referee and answer every assigned player.

    Returns 0 on a completed run.  Raises ProtocolError on malformed traffic
    and OSError on connection loss; callers map those to nonzero exits.
    ``seed`` overrides the referee-provided latent seed (normally left None so
    the run is exactly reproducible from the referee's master seed).
    """
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    sock = socket.create_connection((host, port), timeout=timeout)
    channel = _LineChannel(sock, timeout)
    try:
        channel.send({"type": "hello", "version": PROTOCOL_VERSION})
        welcome = channel.recv()
        if welcome.get("type") != "welcome":
            raise ProtocolError(f"expected welcome, got {welcome.get('type')!r}")
        if welcome.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(f"protocol version mismatch: "
                                f"{welcome.get('version')!r}")
        latent_seed = welcome["latent_seed"] if seed is None else seed
        bound = bind_strategy(strategy, latent_seed, welcome["guess_seed"])
        while True:
            msg = channel.recv()
            kind = msg.get("type")
            if kind == "assign":
                j = msg["player"]
                visible = msg["visible"]
                if not isinstance(j, int) or not isinstance(visible, str) \
                        or set(visible) - {"0", "1"}:
                    raise ProtocolError("malformed assign message")
                bit = bound.guess(j, [1 if c == "1" else 0 for c in visible])
                channel.send({"type": "guess", "player": j, "bit": int(bit)})
            elif kind == "result":
                continue
            elif kind == "done":
                return 0
            else:
                raise ProtocolError(f"unexpected message type {kind!r}")
    finally:
        channel.close()
