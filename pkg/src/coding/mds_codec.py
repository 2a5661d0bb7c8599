"""Real-valued systematic MDS codes for block vectors.

Codes are built over the reals (no finite-field arithmetic). A code with k
message blocks and r = 2t parity blocks corrects any t corrupted blocks and
detects any larger number of blocks corrupted by continuous noise.
"""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

TOL_DETECT = 1e-8
TOL_DECODE = 1e-6

# (4, 2) example codes used to lay out a 2x2 base grid with t = 1
EXAMPLE_ROW_PARITY = ((1.0, 1.0), (1.0, -1.0))
EXAMPLE_COL_PARITY = ((1.0, 1.0), (1.0, 2.0))


class CodecError(ValueError):
    """Raised for malformed codes or code words."""


class DecodeStatus(Enum):
    CLEAN = "clean"
    CORRECTED = "corrected"
    UNCORRECTABLE = "uncorrectable"


@dataclass(frozen=True, eq=False)
class MdsCode:
    k: int
    r: int
    generator: np.ndarray
    parity_check: np.ndarray

    @property
    def t(self):
        return self.r // 2

    @property
    def length(self):
        return self.k + self.r

    @property
    def parity(self):
        """The k x r parity part A of the systematic generator [I | A]"""
        return self.generator[:, self.k:]


@dataclass(frozen=True, eq=False)
class BlockVector:
    """k + r equally sized real blocks stored as the rows of a 2-D array."""
    blocks: np.ndarray

    def __post_init__(self):
        if self.blocks.ndim != 2:
            raise CodecError(f"block vector must be 2-D, got shape {self.blocks.shape}")

    @classmethod
    def from_blocks(cls, blocks):
        arrays = [np.asarray(b, dtype=float).ravel() for b in blocks]
        lengths = {a.size for a in arrays}
        if len(lengths) > 1:
            raise CodecError(f"blocks have mismatched lengths {sorted(lengths)}")
        return cls(np.vstack(arrays) if arrays else np.zeros((0, 0)))

    @property
    def block_len(self):
        return self.blocks.shape[1]

    @property
    def count(self):
        return self.blocks.shape[0]

    def __getitem__(self, index):
        return self.blocks[index]


@dataclass(frozen=True, eq=False)
class DecodeOutcome:
    status: DecodeStatus
    message: Optional[np.ndarray] = None
    error_locations: FrozenSet[int] = field(default_factory=frozenset)

    @property
    def ok(self):
        return self.status is not DecodeStatus.UNCORRECTABLE


def cauchy_parity(k, r):
    """Cauchy matrix A[i][j] = 1 / (x_i - y_j) with x_i = i + 1, y_j = -(j + 1)."""
    x = np.arange(1, k + 1, dtype=float)[:, None]
    y = -np.arange(1, r + 1, dtype=float)[None, :]
    return 1.0 / (x - y)


def all_minors_nonsingular(parity, tol=1e-12):
    """Every square submatrix of the parity part is nonsingular (the MDS property)."""
    k, r = parity.shape
    for size in range(1, min(k, r) + 1):
        for rows in itertools.combinations(range(k), size):
            for cols in itertools.combinations(range(r), size):
                if abs(np.linalg.det(parity[np.ix_(rows, cols)])) <= tol:
                    return False
    return True


def make_mds(k, t, parity=None):
    """Build a systematic (k + 2t, k) MDS code.

    Parity columns default to a Cauchy construction. An explicit k x 2t
    parity matrix may be supplied instead; it must keep the MDS property.
    """
    if k < 1:
        raise CodecError(f"k must be >= 1, got {k}")
    if t < 0:
        raise CodecError(f"t must be >= 0, got {t}")
    r = 2 * t

    if parity is None:
        parity = cauchy_parity(k, r)
    else:
        parity = np.asarray(parity, dtype=float).reshape(k, -1) if r else np.zeros((k, 0))
        if parity.shape != (k, r):
            raise CodecError(f"parity matrix must be {k}x{r}, got {parity.shape}")
        if not all_minors_nonsingular(parity):
            raise CodecError("explicit parity matrix does not give an MDS code")

    generator = np.hstack([np.eye(k), parity])
    generator.setflags(write=False)
    code = MdsCode(k=k, r=r, generator=generator, parity_check=np.zeros((r, k + r)))
    h = parity_check_of(code)
    h.setflags(write=False)
    object.__setattr__(code, "parity_check", h)
    logger.debug(f"Built ({k + r}, {k}) MDS code")
    return code


def parity_check_of(code):
    """H = [A^T | -I_r], so that H @ G^T = 0."""
    return np.hstack([code.parity.T, -np.eye(code.r)])


def _as_message(code, message):
    if isinstance(message, np.ndarray) and message.ndim == 2:
        msg = np.asarray(message, dtype=float)
    else:
        msg = BlockVector.from_blocks(message).blocks
    if msg.shape[0] != code.k:
        raise CodecError(f"expected {code.k} message blocks, got {msg.shape[0]}")
    return msg


def encode_block_vector(code, message: Union[np.ndarray, Sequence[np.ndarray]]):
    """Apply (G^T kron I) blockwise; the first k blocks are copied verbatim."""
    msg = _as_message(code, message)
    blocks = np.empty((code.length, msg.shape[1]))
    blocks[:code.k] = msg
    if code.r:
        blocks[code.k:] = code.parity.T @ msg
    return BlockVector(blocks)


def _check_word(code, word):
    if word.count != code.length:
        raise CodecError(f"expected {code.length} blocks, got {word.count}")


def syndrome(code, word):
    """The r syndrome blocks (H kron I) applied to the word."""
    _check_word(code, word)
    return code.parity_check @ word.blocks


def word_scale(word):
    return 1.0 + (float(np.max(np.abs(word.blocks))) if word.blocks.size else 0.0)


def syndrome_fires(code, word, syn=None, tol=TOL_DETECT):
    """Detection predicate: max |syndrome| > tol * (1 + max |word|)."""
    if code.r == 0:
        return False
    if syn is None:
        syn = syndrome(code, word)
    return float(np.max(np.abs(syn))) > tol * word_scale(word)


def recover_message(code, blocks, healthy):
    """Solve for the k message blocks from k healthy positions of a code word."""
    idx = list(healthy)[:code.k]
    if len(idx) < code.k:
        raise CodecError(f"need {code.k} healthy blocks, got {len(idx)}")
    if idx == list(range(code.k)):
        return np.array(blocks[:code.k], dtype=float)
    return np.linalg.solve(code.generator[:, idx].T, blocks[idx])


def decode(code, word, t=None, tol_detect=TOL_DETECT, tol_decode=TOL_DECODE):
    """Correct up to t corrupted blocks by exhaustive support search.

    For support sizes 1..t every subset S is tried: the least-squares error
    e_S with H_S e_S = syndrome is accepted when its residual is below
    tolerance. A unique consistent support at the smallest size is corrected;
    none or several give Uncorrectable.
    """
    _check_word(code, word)
    if t is None:
        t = code.t
    if 2 * t > code.r:
        raise CodecError(f"t={t} exceeds the code's capability r/2={code.t}")

    syn = syndrome(code, word)
    if not syndrome_fires(code, word, syn, tol_detect):
        return DecodeOutcome(DecodeStatus.CLEAN, np.array(word.blocks[:code.k]))

    scale = word_scale(word)
    h = code.parity_check
    for size in range(1, t + 1):
        consistent = []
        for support in itertools.combinations(range(code.length), size):
            h_s = h[:, support]
            e_s, *_ = np.linalg.lstsq(h_s, syn, rcond=None)
            residual = float(np.max(np.abs(h_s @ e_s - syn)))
            if residual <= tol_decode * scale:
                consistent.append(support)
                if len(consistent) > 1:
                    break
        if len(consistent) == 1:
            support = consistent[0]
            healthy = [i for i in range(code.length) if i not in support]
            message = recover_message(code, word.blocks, healthy)
            logger.debug(f"Decoded with error support {support}")
            return DecodeOutcome(DecodeStatus.CORRECTED, message, frozenset(support))
        if len(consistent) > 1:
            logger.debug(f"Ambiguous error support at size {size}")
            break

    return DecodeOutcome(DecodeStatus.UNCORRECTABLE)


def spark_at_least(h, count, tol=1e-10):
    """Every `count` columns of h are linearly independent."""
    cols = h.shape[1]
    if count > h.shape[0]:
        return False
    for subset in itertools.combinations(range(cols), count):
        if np.linalg.matrix_rank(h[:, subset], tol=tol) < count:
            return False
    return True
