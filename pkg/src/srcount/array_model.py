"""Synthetic snapshot generation for a linear antenna array.

Implements the narrowband frame model X = A(theta) S + n with QPSK
emitters, optional coherent multipath replicas, and white circular
Gaussian noise scaled to a prescribed aggregate SINR.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError

ANGLE_FIELD_DEG = 60.0

_QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)


@dataclass(frozen=True)
class ArrayGeometry:
    """Element positions of a linear array, in wavelengths from element 0."""

    num_elements: int
    offsets: tuple = ()

    def __post_init__(self):
        if self.num_elements < 2:
            raise DomainError("array needs at least 2 elements")
        offs = self.offsets or tuple(0.5 * i for i in range(self.num_elements))
        if len(offs) != self.num_elements:
            raise DomainError("offsets length must equal num_elements")
        if offs[0] != 0.0:
            raise DomainError("first element offset must be 0")
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise DomainError("offsets must be strictly increasing")
        object.__setattr__(self, "offsets", tuple(float(d) for d in offs))

    @property
    def offsets_array(self) -> np.ndarray:
        return np.asarray(self.offsets)


@dataclass(frozen=True)
class CoherentSpec:
    """One multipath replica: scaled, phase-rotated copy of a parent source."""

    parent: int
    rho: float
    phi: float


@dataclass(frozen=True)
class Scenario:
    """Ground truth for one frame.

    ``angles_deg`` lists every source angle: the independent sources first,
    then one angle per coherent replica in ``coherent_specs`` order.
    """

    angles_deg: tuple
    snapshots: int
    sinr_db: float
    seed: int
    coherent_specs: tuple = ()
    min_separation_deg: float = 1.0
    noiseless: bool = False

    def __post_init__(self):
        object.__setattr__(self, "angles_deg", tuple(float(a) for a in self.angles_deg))
        object.__setattr__(self, "coherent_specs", tuple(self.coherent_specs))
        if self.snapshots < 1:
            raise DomainError("snapshots must be positive")
        if len(self.coherent_specs) > len(self.angles_deg):
            raise DomainError("more coherent specs than angles")
        for a in self.angles_deg:
            if not -ANGLE_FIELD_DEG <= a <= ANGLE_FIELD_DEG:
                raise DomainError(f"angle {a} outside [-60, 60] degrees")
        n_ind = self.num_noncoherent
        for spec in self.coherent_specs:
            if not 0 <= spec.parent < n_ind:
                raise DomainError(f"coherent parent {spec.parent} is not an independent source")
            if not 0.0 < spec.rho <= 1.0:
                raise DomainError(f"fading factor {spec.rho} outside (0, 1]")
        srt = sorted(self.angles_deg)
        for a, b in zip(srt, srt[1:]):
            if b - a < self.min_separation_deg:
                raise DomainError(
                    f"angles {a} and {b} closer than {self.min_separation_deg} degrees"
                )

    @property
    def num_sources(self) -> int:
        return len(self.angles_deg)

    @property
    def num_noncoherent(self) -> int:
        return len(self.angles_deg) - len(self.coherent_specs)


@dataclass
class Frame:
    """One sampled frame: complex L x N snapshot matrix plus ground truth."""

    data: np.ndarray
    label_total: int
    label_noncoherent: int

    @property
    def num_elements(self) -> int:
        return self.data.shape[0]

    @property
    def snapshots(self) -> int:
        return self.data.shape[1]


def steering_vector(geometry: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Phase response of the array to a plane wave from ``theta_deg``.

    Args:
        geometry: Array element layout.
        theta_deg: Arrival angle in degrees, within [-90, 90].

    Returns:
        Complex vector of length L with unit-modulus entries; entry 0 is 1.
    """
    if not -90.0 <= theta_deg <= 90.0:
        raise DomainError(f"angle {theta_deg} outside [-90, 90] degrees")
    phase = 2.0 * np.pi * geometry.offsets_array * np.sin(np.deg2rad(theta_deg))
    return np.exp(1j * phase)


def gen_qpsk(num_sources: int, num_snapshots: int, rng: np.random.Generator) -> np.ndarray:
    """Independent unit-power QPSK symbol streams, one row per source.

    Args:
        num_sources: Number of independent emitters (0 yields an empty matrix).
        num_snapshots: Symbols per stream.
        rng: Seeded generator; identical seeds reproduce identical symbols.

    Returns:
        Complex matrix of shape (num_sources, num_snapshots) with entries
        drawn from {(+-1 +- 1j)/sqrt(2)}.
    """
    if num_sources < 0:
        raise DomainError("num_sources must be non-negative")
    if num_snapshots < 1:
        raise DomainError("num_snapshots must be positive")
    idx = rng.integers(0, 4, size=(num_sources, num_snapshots))
    return _QPSK[idx]


def make_coherent(parent: np.ndarray, rho: float, phi: float) -> np.ndarray:
    """Coherent multipath replica: amplitude-faded, phase-rotated parent copy."""
    if rho <= 0.0:
        raise DomainError("fading factor must be positive")
    return rho * np.exp(1j * phi) * parent


def sample_frame(geometry: ArrayGeometry, scenario: Scenario) -> Frame:
    """Draw one frame of array snapshots for the given scenario.

    SINR is per source: each unit-power emitter arrives at
    ``scenario.sinr_db`` relative to the per-element noise floor, so the
    noise variance is 10^(-sinr_db/10). Zero-source frames are pure noise
    at that variance; with ``noiseless`` set the noise term is omitted
    entirely.

    Args:
        geometry: Array element layout.
        scenario: Source angles, replica parameters, SINR, snapshot count,
            and the seed that makes the draw deterministic.

    Returns:
        Frame with the L x N snapshot matrix and both ground-truth labels.
    """
    L = geometry.num_elements
    m_total = scenario.num_sources
    m_ind = scenario.num_noncoherent
    n_snap = scenario.snapshots
    if m_total > L - 1:
        raise CapacityError(f"{m_total} sources exceed the L-1={L - 1} capacity")

    rng = np.random.default_rng(scenario.seed)
    signals = gen_qpsk(m_ind, n_snap, rng)

    manifold = np.ones((L, m_total), dtype=complex)
    for col, angle in enumerate(scenario.angles_deg):
        manifold[:, col] = steering_vector(geometry, angle)

    rows = [signals[i] for i in range(m_ind)]
    for spec in scenario.coherent_specs:
        rows.append(make_coherent(signals[spec.parent], spec.rho, spec.phi))

    if m_total > 0:
        clean = manifold @ np.vstack(rows)
    else:
        clean = np.zeros((L, n_snap), dtype=complex)

    if scenario.noiseless:
        return Frame(clean, m_total, m_ind)

    noise_var = 10.0 ** (-scenario.sinr_db / 10.0)
    scale = np.sqrt(noise_var / 2.0)
    noise = scale * (rng.standard_normal((L, n_snap)) + 1j * rng.standard_normal((L, n_snap)))
    return Frame(clean + noise, m_total, m_ind)


def frame_rng(master_seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent substream for frame ``index`` of split ``stream``."""
    return np.random.default_rng([master_seed, stream, index])
