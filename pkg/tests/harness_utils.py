"""Shared helpers for harness tests: thread workers and a recording proxy."""

import socket
import threading

from bellhat.harness import Referee, RefereeConfig, worker_run


def run_harness(strategy, *, n, sampler="uniform", seed=0, trial=0,
                block_size=None, checkpoints=(), worker_count=None,
                port_holder=None, timeout=20.0):
    """Referee in this thread, workers in daemon threads."""
    config = RefereeConfig(n=n, sampler=sampler, seed=seed, trial=trial,
                           block_size=block_size, checkpoints=checkpoints,
                           timeout=timeout)
    referee = Referee(config)
    if port_holder is not None:
        port_holder.append(referee.port)
    blocks = worker_count if worker_count is not None else \
        (n + config.block_size - 1) // config.block_size
    workers = [threading.Thread(
        target=worker_run, args=(strategy, "127.0.0.1", referee.port),
        kwargs={"timeout": timeout}, daemon=True) for _ in range(blocks)]
    for w in workers:
        w.start()
    stats = referee.run()
    for w in workers:
        w.join(timeout=timeout)
    return stats


class RecordingProxy:
    """Forwards referee <-> worker bytes, recording referee-to-worker lines."""

    def __init__(self, referee_port):
        self.referee_port = referee_port
        self.to_worker: list[bytes] = []
        self.listener = socket.socket()
        self.listener.bind(("127.0.0.1", 0))
        self.listener.listen(1)
        self.port = self.listener.getsockname()[1]
        self.thread = threading.Thread(target=self._serve, daemon=True)
        self.thread.start()

    def _pipe(self, src, dst, record):
        buffer = b""
        try:
            while True:
                chunk = src.recv(4096)
                if not chunk:
                    break
                if record is not None:
                    buffer += chunk
                    while b"\n" in buffer:
                        line, buffer = buffer.split(b"\n", 1)
                        record.append(line)
                dst.sendall(chunk)
        except OSError:
            pass
        finally:
            try:
                dst.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    def _serve(self):
        worker_side, _ = self.listener.accept()
        referee_side = socket.create_connection(("127.0.0.1", self.referee_port))
        up = threading.Thread(target=self._pipe,
                              args=(worker_side, referee_side, None), daemon=True)
        down = threading.Thread(target=self._pipe,
                                args=(referee_side, worker_side, self.to_worker),
                                daemon=True)
        up.start()
        down.start()
        up.join()
        down.join()
        worker_side.close()
        referee_side.close()
