"""Dataset ingestion and shard preparation: NSL-KDD style CSV parsing,
feature selection, non-i.i.d. partitioning by a sort feature, per-client
z-score normalization, and a seeded synthetic low-rank generator with
planted anomalies.

Feature matrices are d x B with columns as samples.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (EmptyShard, MissingFeature, ParseError, ShapeMismatch,
                     UnknownLabel)

# NSL-KDD column order (41 features, then label, then optional difficulty).
NSL_KDD_COLUMNS = [
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate",
    "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
]

# Default 34-feature subset: the numeric NSL-KDD features minus the
# categorical columns and four near-constant binary flags. Editable via a
# plain-text feature list (one name per line).
DEFAULT_FEATURES = [
    c for c in NSL_KDD_COLUMNS
    if c not in ("protocol_type", "service", "flag",
                 "land", "urgent", "num_outbound_cmds", "is_host_login")
]
assert len(DEFAULT_FEATURES) == 34

# Raw NSL-KDD attack names grouped into the four intrusion classes.
DEFAULT_LABEL_MAP = {
    "normal": "normal",
    # DoS
    "back": "dos", "land": "dos", "neptune": "dos", "pod": "dos",
    "smurf": "dos", "teardrop": "dos", "apache2": "dos", "udpstorm": "dos",
    "processtable": "dos", "mailbomb": "dos", "worm": "dos",
    # Probe
    "satan": "probe", "ipsweep": "probe", "nmap": "probe",
    "portsweep": "probe", "mscan": "probe", "saint": "probe",
    # R2L
    "guess_passwd": "r2l", "ftp_write": "r2l", "imap": "r2l", "phf": "r2l",
    "multihop": "r2l", "warezmaster": "r2l", "warezclient": "r2l",
    "spy": "r2l", "xlock": "r2l", "xsnoop": "r2l", "snmpguess": "r2l",
    "snmpgetattack": "r2l", "httptunnel": "r2l", "sendmail": "r2l",
    "named": "r2l",
    # U2R
    "buffer_overflow": "u2r", "loadmodule": "u2r", "rootkit": "u2r",
    "perl": "u2r", "sqlattack": "u2r", "xterm": "u2r", "ps": "u2r",
}

LABEL_CLASSES = ("normal", "dos", "probe", "r2l", "u2r")


@dataclass(frozen=True)
class RawRecord:
    values: np.ndarray = field(repr=False)  # selected features, length d
    label: str
    row_index: int


@dataclass(frozen=True)
class ClientShard:
    client_id: int
    features: np.ndarray = field(repr=False)  # d x B, columns are samples
    labels: tuple = ()
    mean: np.ndarray = None
    std: np.ndarray = None


def read_feature_list(path):
    """Plain-text feature config: one name per line; blanks and '#'
    comment lines ignored."""
    names = []
    with open(path) as fh:
        for line in fh:
            name = line.strip()
            if name and not name.startswith("#"):
                names.append(name)
    return names


def load_dataset(path, feature_list=None, label_map=None,
                 columns=None, label_column=41):
    """Parse an NSL-KDD style CSV into RawRecords with the configured
    feature subset and mapped labels.

    Raises ParseError with the offending row/column, UnknownLabel for
    labels outside the map, MissingFeature for unknown feature names.
    """
    features = list(feature_list) if feature_list else list(DEFAULT_FEATURES)
    label_map = dict(label_map) if label_map else dict(DEFAULT_LABEL_MAP)
    columns = list(columns) if columns else list(NSL_KDD_COLUMNS)
    try:
        idx = [columns.index(f) for f in features]
    except ValueError as exc:
        raise MissingFeature(str(exc)) from None

    records = []
    with open(path) as fh:
        n_cols = None
        for row_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if row_no == 0 and parts[0] == columns[0]:
                continue  # optional header
            if n_cols is None:
                n_cols = len(parts)
            if len(parts) != n_cols:
                raise ParseError(
                    f"row {row_no}: expected {n_cols} columns, got {len(parts)}"
                )
            if label_column >= len(parts):
                raise ParseError(f"row {row_no}: no label column {label_column}")
            raw_label = parts[label_column].strip().lower().rstrip(".")
            if raw_label not in label_map:
                raise UnknownLabel(f"row {row_no}: label {raw_label!r}")
            vals = np.empty(len(idx))
            for out_i, col_i in enumerate(idx):
                try:
                    vals[out_i] = float(parts[col_i])
                except ValueError:
                    raise ParseError(
                        f"row {row_no}, column {columns[col_i]!r}: "
                        f"non-numeric value {parts[col_i]!r}"
                    ) from None
            records.append(RawRecord(values=vals, label=label_map[raw_label],
                                     row_index=row_no))
    return records


def records_to_matrix(records):
    """Stack records as columns; returns (d x m matrix, labels tuple)."""
    if not records:
        raise EmptyShard("no records")
    mat = np.column_stack([r.values for r in records])
    return mat, tuple(r.label for r in records)


def partition_non_iid(records, n_clients, sort_feature,
                      feature_list=None, benign_only=True):
    """Sort records by one feature (stable, ties by original row index)
    and slice into n_clients contiguous equal-size shards; the trailing
    remainder is dropped. With benign_only, attack records are removed
    first so shards are pure training material.

    Returns (shards, n_dropped).
    """
    features = list(feature_list) if feature_list else list(DEFAULT_FEATURES)
    try:
        fpos = features.index(sort_feature)
    except ValueError:
        raise MissingFeature(f"sort feature {sort_feature!r} not in feature list")
    pool = [r for r in records if r.label == "normal"] if benign_only else list(records)
    if n_clients > len(pool):
        raise ShapeMismatch(f"{n_clients} clients but only {len(pool)} records")
    pool.sort(key=lambda r: (r.values[fpos], r.row_index))
    width = len(pool) // n_clients
    dropped = len(pool) - width * n_clients
    shards = []
    for cid in range(n_clients):
        chunk = pool[cid * width:(cid + 1) * width]
        mat, labels = records_to_matrix(chunk)
        shards.append(ClientShard(client_id=cid, features=mat, labels=labels))
    return shards, dropped


def zscore_fit_apply(shard: ClientShard) -> ClientShard:
    """Per-feature z-scoring with the client's own statistics. Features
    with vanishing spread are zeroed and their std recorded as 1."""
    x = np.asarray(shard.features, dtype=float)
    if x.size == 0:
        raise EmptyShard(f"client {shard.client_id} shard is empty")
    mean = x.mean(axis=1)
    std = x.std(axis=1)
    degenerate = std < 1e-12
    std_safe = np.where(degenerate, 1.0, std)
    z = (x - mean[:, None]) / std_safe[:, None]
    z[degenerate, :] = 0.0
    return replace(shard, features=z, mean=mean, std=std_safe)


def apply_zscore(mean, std, x) -> np.ndarray:
    """Transform new samples (d x m) with previously fitted statistics."""
    x = np.asarray(x, dtype=float)
    return (x - np.asarray(mean)[:, None]) / np.asarray(std)[:, None]


def equalize_widths(shards, width=None, seed=0):
    """Subsample every shard to a common width (default: the minimum)
    with a seeded generator, so the row-subspace factor is well-defined
    across clients."""
    widths = [s.features.shape[1] for s in shards]
    target = min(widths) if width is None else width
    rng = np.random.default_rng(seed)
    out = []
    for s in shards:
        m = s.features.shape[1]
        if m < target:
            raise ShapeMismatch(f"client {s.client_id} has {m} < width {target}")
        keep = np.sort(rng.choice(m, size=target, replace=False))
        labels = tuple(s.labels[i] for i in keep) if s.labels else ()
        out.append(replace(s, features=s.features[:, keep], labels=labels))
    return out


def filter_slice(matrix, labels, keep_classes):
    """Evaluation-slice filter: keep normal plus the listed attack
    classes; returns (matrix subset, boolean attack labels)."""
    keep = {"normal"} | {c.strip().lower() for c in keep_classes}
    mask = np.array([lab in keep for lab in labels])
    sub = np.asarray(matrix)[:, mask]
    is_attack = np.array([lab != "normal" for lab, m in zip(labels, mask) if m])
    return sub, is_attack


@dataclass(frozen=True)
class SynthSpec:
    d: int = 34
    width: int = 80          # samples per client shard
    n_clients: int = 20
    rank: int = 3
    noise: float = 0.05
    anomaly_fraction: float = 0.05
    anomaly_offset: float = 0.5   # magnitude of the off-subspace shift
    n_test: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.rank > min(self.d, self.width):
            raise ValueError("rank must be <= min(d, width)")
        if not 0.0 <= self.anomaly_fraction < 1.0:
            raise ValueError("anomaly_fraction must be in [0, 1)")


def generate_synthetic(spec: SynthSpec):
    """Seeded low-rank benchmark with planted anomalies.

    Benign samples live near a shared rank-r subspace; each client draws
    coefficients with its own skewed per-direction scales (non-i.i.d.),
    while the test set mixes all directions. Anomalies are benign samples
    shifted by anomaly_offset along a direction orthogonal to the true
    subspace.

    Returns (train shards: list of d x width arrays,
             test matrix d x n_test, boolean labels, true basis d x r).
    """
    rng = np.random.default_rng(spec.seed)
    d, r = spec.d, spec.rank
    basis = np.linalg.qr(rng.standard_normal((d, d)))[0]
    u_true = basis[:, :r]
    u_perp = basis[:, r:]
    scales = np.linspace(3.0, 1.0, r)

    shards = []
    for _ in range(spec.n_clients):
        # Skewed per-client energy across the true directions.
        w = rng.dirichlet(np.full(r, 0.3))
        coeff = (scales * np.sqrt(r * w))[:, None] * rng.standard_normal(
            (r, spec.width))
        x = u_true @ coeff + spec.noise * rng.standard_normal((d, spec.width))
        shards.append(x)

    coeff = scales[:, None] * rng.standard_normal((r, spec.n_test))
    test = u_true @ coeff + spec.noise * rng.standard_normal((d, spec.n_test))
    n_anom = int(round(spec.anomaly_fraction * spec.n_test))
    labels = np.zeros(spec.n_test, dtype=bool)
    if n_anom:
        which = rng.choice(spec.n_test, size=n_anom, replace=False)
        labels[which] = True
        if d > r:
            dirs = u_perp @ rng.standard_normal((d - r, n_anom))
            dirs /= np.linalg.norm(dirs, axis=0)
            test[:, which] += spec.anomaly_offset * dirs
    return shards, test, labels, u_true
