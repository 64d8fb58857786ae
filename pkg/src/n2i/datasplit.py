"""Angular K-splitting of sinograms and assembly of training pairs.

Also provides the stride-based pixel partition used by the simplified
masking-based (Noise2Self-style) training scheme.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import check_sinogram


@dataclass(frozen=True)
class SplitScheme:
    """Number of splits K and the input/target strategy.

    Strategy "X1": target sections are the singletons {1}, ..., {K}; the
    input is the mean of the other K-1 sub-reconstructions.  Strategy
    "1X": the complements; the input is a single sub-reconstruction.
    """

    K: int
    strategy: str

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if self.strategy not in ("X1", "1X"):
            raise ValueError(f"strategy must be 'X1' or '1X', got {self.strategy!r}")

    @property
    def sections(self):
        """Target sections as frozensets of sub-reconstruction indices 1..K."""
        singletons = [frozenset({j}) for j in range(1, self.K + 1)]
        if self.strategy == "X1":
            return tuple(singletons)
        full = frozenset(range(1, self.K + 1))
        return tuple(full - s for s in singletons)


@dataclass(frozen=True)
class DatasetPair:
    input: np.ndarray
    target: np.ndarray
    slice_id: int
    section: frozenset
    loss_mask: np.ndarray = None  # restricts the loss; None means all pixels

    def __post_init__(self):
        if self.input.shape != self.target.shape:
            raise ValueError("input and target dimensions differ")
        if self.loss_mask is not None and self.loss_mask.shape != self.input.shape:
            raise ValueError("loss mask dimensions differ from the images")


def split_sinogram(sinogram, K, geometry=None):
    """Split into K sub-sinograms; sub j holds angle rows j-1, j-1+K, ...

    Requires K to divide the number of angles; the interleave of the
    sub-sinograms reproduces the original exactly.
    """
    sinogram = np.asarray(sinogram)
    if geometry is not None:
        sinogram = check_sinogram(sinogram, geometry)
    n_angles = sinogram.shape[0]
    if K < 1 or n_angles % K != 0:
        raise ValueError(f"K={K} must divide n_angles={n_angles}")
    return [sinogram[j::K] for j in range(K)]


def build_pairs(sub_reconstructions, scheme, slice_id=0):
    """Training pairs from K sub-reconstructions per the split scheme.

    For each target section J the target is the mean sub-reconstruction
    over J and the input is the mean over its complement.
    """
    subs = [np.asarray(s) for s in sub_reconstructions]
    if len(subs) != scheme.K:
        raise ValueError(
            f"expected {scheme.K} sub-reconstructions, got {len(subs)}"
        )
    all_idx = frozenset(range(1, scheme.K + 1))
    pairs = []
    for section in scheme.sections:
        comp = all_idx - section
        target = np.mean([subs[j - 1] for j in sorted(section)], axis=0)
        inp = np.mean([subs[j - 1] for j in sorted(comp)], axis=0)
        pairs.append(DatasetPair(input=inp, target=target,
                                 slice_id=slice_id, section=section))
    return pairs


@dataclass(frozen=True)
class MaskPartition:
    """Partition of the pixel grid into stride^2 phase classes.

    Pixel (iy, ix) belongs to phase (iy % stride) * stride + (ix % stride),
    so for stride >= 2 no two 8-adjacent pixels share a class.
    """

    stride: int = 4

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def n_phases(self):
        return self.stride**2

    def phase_mask(self, shape, phase):
        if not (0 <= phase < self.n_phases):
            raise ValueError(f"phase {phase} out of range")
        py, px = divmod(phase, self.stride)
        mask = np.zeros(shape, dtype=bool)
        mask[py::self.stride, px::self.stride] = True
        return mask


def _neighbor_mean(image):
    """Mean of the 8 neighbors of every pixel, reflect-padded at borders."""
    p = np.pad(image, 1, mode="reflect")
    acc = np.zeros_like(image, dtype=float)
    h, w = image.shape
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            if dy == 1 and dx == 1:
                continue
            acc += p[dy:dy + h, dx:dx + w]
    return acc / 8.0


def mask_partition_pairs(noisy_image, partition, phase):
    """Masked input / target mask for one phase class.

    The input replaces the phase's pixels with the mean of their 8
    neighbors; the loss is evaluated only where the returned mask is True.
    """
    noisy_image = np.asarray(noisy_image, dtype=float)
    mask = partition.phase_mask(noisy_image.shape, phase)
    masked = noisy_image.copy()
    masked[mask] = _neighbor_mean(noisy_image)[mask]
    return masked, mask


def save_manifest(pairs, paths, manifest_path):
    """Plain-text dataset index: slice id, section, input path, target path."""
    if len(pairs) != len(paths):
        raise ValueError("one (input, target) path pair required per pair")
    with open(manifest_path, "w") as fh:
        fh.write("# slice_id\tsection\tinput\ttarget\n")
        for pair, (in_path, tgt_path) in zip(pairs, paths):
            section = ",".join(str(j) for j in sorted(pair.section))
            fh.write(f"{pair.slice_id}\t{section}\t{in_path}\t{tgt_path}\n")


def load_manifest(manifest_path):
    rows = []
    with open(manifest_path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            slice_id, section, in_path, tgt_path = line.split("\t")
            rows.append((
                int(slice_id),
                frozenset(int(j) for j in section.split(",")),
                in_path,
                tgt_path,
            ))
    return rows
