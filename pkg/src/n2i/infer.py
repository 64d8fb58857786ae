"""Inference rules for the two self-supervised training regimes.

Section-wise averaging for the angular-splitting regime; section-wise
combination for the masking (Noise2Self-style) regime.
"""

import numpy as np

from .datasplit import mask_partition_pairs
from .model import apply_denoiser


def noise2inverse_infer(network, sub_reconstructions, scheme):
    """Average the trained network over all input arrangements.

    For each target section J the input is the mean sub-reconstruction of
    its complement, exactly as during training; the output is the mean of
    the network outputs over all sections.
    """
    subs = [np.asarray(s) for s in sub_reconstructions]
    if len(subs) != scheme.K:
        raise ValueError(
            f"expected {scheme.K} sub-reconstructions, got {len(subs)}"
        )
    if network.scheme_k is not None and network.scheme_k != scheme.K:
        raise ValueError(
            f"network was trained with K={network.scheme_k}, "
            f"inference requested K={scheme.K}"
        )
    if (network.scheme_strategy is not None
            and network.scheme_strategy != scheme.strategy):
        raise ValueError(
            f"network was trained with strategy {network.scheme_strategy}, "
            f"inference requested {scheme.strategy}"
        )
    all_idx = frozenset(range(1, scheme.K + 1))
    out = np.zeros_like(subs[0], dtype=float)
    for section in scheme.sections:
        comp = sorted(all_idx - section)
        inp = np.mean([subs[j - 1] for j in comp], axis=0)
        out += apply_denoiser(network, inp)
    return out / len(scheme.sections)


def noise2self_infer(network, noisy_image, partition):
    """Assemble the output class by class from masked inputs.

    For each phase class the network sees the image with that class
    replaced by neighbor means, and only the class pixels of its output
    are kept.
    """
    noisy_image = np.asarray(noisy_image, dtype=float)
    out = np.zeros_like(noisy_image)
    for phase in range(partition.n_phases):
        masked, mask = mask_partition_pairs(noisy_image, partition, phase)
        pred = apply_denoiser(network, masked)
        out[mask] = pred[mask]
    return out
