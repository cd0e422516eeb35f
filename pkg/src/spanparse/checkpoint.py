"""Checkpoint files: a SQLite key/value table holding a trained parser.

Keys:

- `version`: checkpoint format version, checked on load
- `params`: the CSPN1 parameter container
- `words`, `tags`, `labels`: vocabularies in index order (JSON)
- `model_config`, `train_config`: configuration (JSON)
- `epoch`, `dev_f1`, `dev_pos`, `history`: training progress (JSON)

Examples:
    >>> from spanparse.checkpoint import CheckpointStore
    >>> store = CheckpointStore("/tmp/model.ckpt")
    >>> store["note"] = b"hello"
    >>> store["note"]
    b'hello'

"""

import logging
import os
import os.path
import threading
from collections.abc import Iterator, MutableMapping
from contextlib import closing, contextmanager
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import apsw
import msgspec

from .config import ModelConfig, TrainConfig
from .const import CHECKPOINT_PRAGMAS, CHECKPOINT_TABLE, CHECKPOINT_VERSION, TIMEOUT
from .errors import VersionError
from .tensor import Parameters, dump_params, load_params
from .treebank import Vocab

if TYPE_CHECKING:
    from .parser import Parser

logger = logging.getLogger(__name__)

Connection = apsw.Connection
Cursor = apsw.Cursor

READONLY_PRAGMAS = ("cache_size", "temp_store")


class EpochRecord(msgspec.Struct, frozen=True):
    """One line of the training progress log."""

    epoch: int
    train_loss: float
    dev_f1: float
    seconds: float
    dev_pos: float = 0.0

    def log_line(self) -> str:
        return (
            f"epoch={self.epoch} train_loss={self.train_loss:.6f}"
            f" dev_f1={self.dev_f1:.2f} dev_pos={self.dev_pos:.2f}"
            f" seconds={self.seconds:.2f}"
        )


class CheckpointStore(MutableMapping):
    """SQLite backed `str -> bytes` mapping.

    Args:
        filename: database file, created on first write unless *readonly*.
        readonly: open an existing file without write access.
        timeout: busy timeout in seconds.
    """

    def __init__(
        self,
        filename: os.PathLike | str,
        readonly: bool = False,
        timeout: float = TIMEOUT,
    ) -> None:
        filename = os.path.expanduser(os.fspath(filename))
        self._filename = filename
        self._readonly = readonly
        self._timeout = float(timeout)
        self._local = threading.local()
        self._txn_id: Optional[int] = None
        table = f'"{CHECKPOINT_TABLE}"'
        self._statements: dict[str, str] = {
            "CREATE": (
                f"CREATE TABLE IF NOT EXISTS {table} ("
                " _key TEXT PRIMARY KEY NOT NULL, value BLOB NOT NULL)"
            ),
            "GET": f"SELECT value FROM {table} WHERE _key = ? LIMIT 1",
            "SET": (
                f"INSERT INTO {table}(_key, value) VALUES (?, ?)"
                " ON CONFLICT (_key) DO UPDATE SET value = excluded.value"
            ),
            "DELETE": f"DELETE FROM {table} WHERE _key = ? RETURNING _key",
            "ITER": f"SELECT _key FROM {table} ORDER BY rowid ASC",
            "COUNT": f"SELECT COUNT (_key) FROM {table}",
        }

    @property
    def filename(self) -> str:
        return self._filename

    @property
    def _con(self) -> Connection:
        # Check process ID to support process forking. If the process
        # ID changes, close the connection and update the process ID.
        local_pid = getattr(self._local, "pid", None)
        pid = os.getpid()
        if local_pid != pid:
            self.close()
            self._local.pid = pid

        con = getattr(self._local, "con", None)
        if con is None:
            if self._readonly:
                con = Connection(self._filename, flags=apsw.SQLITE_OPEN_READONLY)
            else:
                con = Connection(self._filename)
            con.set_busy_timeout(int(self._timeout * 1000))
            for key, value in CHECKPOINT_PRAGMAS.items():
                if not self._readonly or key in READONLY_PRAGMAS:
                    con.pragma(key, value)
            if not self._readonly:
                con.execute(self._statements["CREATE"])
            self._local.con = con
        return con

    def close(self) -> None:
        con = getattr(self._local, "con", None)
        if con is None:
            return
        con.close()
        self._local.con = None

    def __enter__(self) -> "CheckpointStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @contextmanager
    def transact(self):
        """Group writes into one `BEGIN IMMEDIATE` transaction.

        Nested calls reuse the outer transaction.
        """
        cursor: Cursor = self._con.cursor()
        tid = threading.get_ident()
        if tid == self._txn_id:
            begin = False
        else:
            cursor.execute("BEGIN IMMEDIATE")
            begin = True
            self._txn_id = tid
        try:
            yield cursor
        except BaseException:
            if begin:
                self._txn_id = None
                cursor.execute("ROLLBACK")
            cursor.close()
            raise
        else:
            if begin:
                self._txn_id = None
                cursor.execute("COMMIT")
            cursor.close()

    def __getitem__(self, key: str) -> bytes:
        with closing(self._con.execute(self._statements["GET"], (key,))) as cx:
            row = cx.fetchone()
        if row is None:
            raise KeyError(key)
        return bytes(row[0])

    def __setitem__(self, key: str, value: bytes) -> None:
        with closing(self._con.execute(self._statements["SET"], (key, value))):
            pass

    def __delitem__(self, key: str) -> None:
        with closing(self._con.execute(self._statements["DELETE"], (key,))) as cx:
            row = cx.fetchone()
        if row is None:
            raise KeyError(key)

    def __iter__(self) -> Iterator[str]:
        with closing(self._con.execute(self._statements["ITER"])) as cx:
            keys = [row[0] for row in cx]
        return iter(keys)

    def __len__(self) -> int:
        with closing(self._con.execute(self._statements["COUNT"])) as cx:
            return cx.fetchone()[0]

    def check(self) -> list[str]:
        """Messages of SQLite's integrity check, empty when the file is fine."""
        with closing(self._con.execute("PRAGMA integrity_check")) as cx:
            rows = cx.fetchall()
        if len(rows) == 1 and rows[0][0] == "ok":
            return []
        return [message for (message,) in rows]


@dataclass
class Checkpoint:
    """Everything needed to rebuild a trained parser."""

    params: Parameters
    words: Vocab
    tags: Vocab
    labels: Vocab
    model_config: ModelConfig
    train_config: Optional[TrainConfig] = None
    epoch: int = 0
    dev_f1: float = 0.0
    dev_pos: float = 0.0
    history: list[EpochRecord] = field(default_factory=list)

    @classmethod
    def from_parser(cls, parser: "Parser", **progress) -> "Checkpoint":
        """Snapshot of *parser*; the parameters are copied."""
        return cls(
            params=parser.params.copy(),
            words=parser.words,
            tags=parser.tags,
            labels=parser.labels,
            model_config=parser.config,
            **progress,
        )

    def parser(self) -> "Parser":
        from .parser import Parser

        return Parser(
            self.model_config,
            self.words,
            self.tags,
            self.labels,
            params=self.params.copy(),
        )


_json = msgspec.json.Encoder()


def save_checkpoint(checkpoint: Checkpoint, path: os.PathLike | str) -> None:
    """Write *checkpoint* into *path*, replacing whatever it held before."""
    train_config = checkpoint.train_config
    values = {
        "version": _json.encode(CHECKPOINT_VERSION),
        "params": dump_params(checkpoint.params),
        "words": _json.encode(list(checkpoint.words)),
        "tags": _json.encode(list(checkpoint.tags)),
        "labels": _json.encode(list(checkpoint.labels)),
        "model_config": checkpoint.model_config.model_dump_json().encode("utf-8"),
        "train_config": (
            b"null"
            if train_config is None
            else train_config.model_dump_json().encode("utf-8")
        ),
        "epoch": _json.encode(checkpoint.epoch),
        "dev_f1": _json.encode(checkpoint.dev_f1),
        "dev_pos": _json.encode(checkpoint.dev_pos),
        "history": _json.encode(checkpoint.history),
    }
    with CheckpointStore(path) as store:
        with store.transact():
            store.clear()
            store.update(values)
    logger.info(
        "checkpoint %s written (epoch %d, dev F1 %.2f)",
        path,
        checkpoint.epoch,
        checkpoint.dev_f1,
    )


def _read(store: CheckpointStore) -> dict[str, bytes]:
    try:
        values = dict(store.items())
    except (
        apsw.CantOpenError,
        apsw.CorruptError,
        apsw.NotADBError,
        apsw.SQLError,
    ) as exc:
        raise VersionError(f"{store.filename} is not a checkpoint: {exc}") from exc
    missing = {"version", "params", "words", "tags", "labels", "model_config"}
    missing -= set(values)
    if missing:
        raise VersionError(f"{store.filename} lacks {', '.join(sorted(missing))}")
    return values


def load_checkpoint(path: os.PathLike | str) -> Checkpoint:
    """Read a checkpoint written by `save_checkpoint`.

    Raises:
        FileNotFoundError: *path* does not exist.
        VersionError: the file is not a checkpoint of this version.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no checkpoint at {path}")
    with CheckpointStore(path, readonly=True) as store:
        values = _read(store)
    try:
        version = msgspec.json.decode(values["version"], type=int)
    except msgspec.DecodeError as exc:
        raise VersionError(f"unreadable checkpoint version in {path}") from exc
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    train_config = msgspec.json.decode(values.get("train_config", b"null"))

    def vocab(key: str) -> Vocab:
        return Vocab(msgspec.json.decode(values[key], type=list[str]))

    return Checkpoint(
        params=load_params(values["params"]),
        words=vocab("words"),
        tags=vocab("tags"),
        labels=vocab("labels"),
        model_config=ModelConfig.model_validate_json(values["model_config"]),
        train_config=(
            None if train_config is None else TrainConfig.model_validate(train_config)
        ),
        epoch=msgspec.json.decode(values.get("epoch", b"0"), type=int),
        dev_f1=msgspec.json.decode(values.get("dev_f1", b"0.0"), type=float),
        dev_pos=msgspec.json.decode(values.get("dev_pos", b"0.0"), type=float),
        history=msgspec.json.decode(
            values.get("history", b"[]"), type=list[EpochRecord]
        ),
    )
