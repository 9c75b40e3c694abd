"""
FeatCompress: replace every feature frame by the representative of its
cluster, with either k-means or temporally contiguous warped k-means
clusters. Output keeps the N x d shape.

Gradients flow through the cluster means; the partition itself is constant.
"""
import math
from typing import List, Optional, Tuple

import numpy as np
import torch

from advsr.exceptions import TransformError
from advsr.features.matrix import FeatureMatrix
from advsr.logging_config import get_defense_logger
from advsr.transforms.base import Transform

logger = get_defense_logger()

METHODS = ('kmeans', 'warped-kmeans')
MAX_ITERS = 100
TOLERANCE = 1e-6

# default compression ratio per (method, stage)
DEFAULT_RATIOS = {
    ('kmeans', 'origin'): 0.2,
    ('warped-kmeans', 'origin'): 0.35,
}
DEFAULT_RATIO_LATER_STAGES = 0.1


def default_ratio(method: str, stage: str) -> float:
    return DEFAULT_RATIOS.get((method, stage), DEFAULT_RATIO_LATER_STAGES)


def n_clusters(n: int, cl_r: float) -> int:
    if n < 1:
        raise TransformError("cannot cluster an empty feature matrix")
    if not 0 < cl_r <= 1:
        raise TransformError(f"cl_r must lie in (0, 1], got {cl_r}")
    return min(n, max(1, int(math.floor(cl_r * n + 0.5))))


def _sq_dists(points: torch.Tensor, centers: torch.Tensor) -> torch.Tensor:
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(dim=-1)


def _sse(points: torch.Tensor, labels: torch.Tensor, centers: torch.Tensor) -> float:
    return float(((points - centers[labels]) ** 2).sum())


def kmeans_plusplus(points: torch.Tensor, k: int, generator: Optional[torch.Generator]) -> torch.Tensor:
    n = points.shape[0]
    chosen = [int(torch.randint(n, (1,), generator=generator))]
    closest = _sq_dists(points, points[chosen]).min(dim=1).values
    for _ in range(1, k):
        total = float(closest.sum())
        if total > 0:
            idx = int(torch.multinomial(closest / total, 1, generator=generator))
        else:
            idx = int(torch.randint(n, (1,), generator=generator))
        chosen.append(idx)
        closest = torch.minimum(closest, _sq_dists(points, points[idx:idx + 1]).squeeze(1))
    return points[chosen].clone()


def kmeans(points: torch.Tensor, k: int, generator: Optional[torch.Generator] = None,
           max_iters: int = MAX_ITERS, tol: float = TOLERANCE) -> Tuple[torch.Tensor, List[float]]:
    """
    Lloyd's algorithm from a k-means++ start on detached [N, d] points.

    Returns:
        (labels [N], SSE after each update step)
    """
    points = points.detach()
    centers = kmeans_plusplus(points, k, generator)
    trace: List[float] = []
    labels = _sq_dists(points, centers).argmin(dim=1)
    for _ in range(max_iters):
        sums = torch.zeros_like(centers).index_add_(0, labels, points)
        counts = torch.bincount(labels, minlength=k)
        occupied = counts > 0
        # empty clusters keep their center
        new_centers = torch.where(occupied[:, None], sums / counts.clamp(min=1)[:, None], centers)
        shift = float((new_centers - centers).abs().max())
        centers = new_centers
        trace.append(_sse(points, labels, centers))
        if shift <= tol:
            break
        labels = _sq_dists(points, centers).argmin(dim=1)
    return labels, trace


def _segment_costs(points: np.ndarray) -> np.ndarray:
    """cost[i, j] = SSE of rows i..j-1 around their mean (inf where j <= i)"""
    n = points.shape[0]
    # SSE is shift invariant; centering keeps the prefix sums small
    centered = points - points.mean(axis=0)
    s1 = np.vstack([np.zeros((1, points.shape[1])), np.cumsum(centered, axis=0)])
    s2 = np.concatenate([[0.0], np.cumsum((centered ** 2).sum(axis=1))])
    norms = (s1 ** 2).sum(axis=1)
    # ||s1[j] - s1[i]||^2 from the Gram matrix, O(N^2) memory
    between = norms[:, None] + norms[None, :] - 2.0 * (s1 @ s1.T)
    length = (np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None]).astype(np.float64)
    with np.errstate(divide='ignore', invalid='ignore'):
        cost = (s2[None, :] - s2[:, None]) - between / length
    cost = np.maximum(cost, 0.0)
    cost[length <= 0] = np.inf
    return cost


def _partition_sse(costs: np.ndarray, bounds: List[int]) -> float:
    return float(sum(costs[a, b] for a, b in zip(bounds[:-1], bounds[1:])))


def _optimal_bounds(costs: np.ndarray, k: int) -> List[int]:
    """Exact least-SSE split of 0..N into k contiguous segments"""
    n = costs.shape[0] - 1
    best = costs[0].copy()
    back = []
    for _ in range(1, k):
        total = best[:, None] + costs
        back.append(total.argmin(axis=0))
        best = total.min(axis=0)
    bounds = [n]
    for arg in reversed(back):
        bounds.append(int(arg[bounds[-1]]))
    bounds.append(0)
    return bounds[::-1]


def warped_kmeans(points: torch.Tensor, k: int, max_passes: int = MAX_ITERS) -> Tuple[torch.Tensor, List[float]]:
    """
    Contiguous clustering: equal segments refined by single-step boundary
    moves kept only when SSE drops, then polished by an exact segmentation
    pass kept only if it lowers SSE.

    Returns:
        (monotone labels [N], SSE after each accepted refinement)
    """
    pts = points.detach().cpu().numpy()
    n = pts.shape[0]
    costs = _segment_costs(pts)
    bounds = [int(math.floor(j * n / k + 0.5)) for j in range(k + 1)]
    sse = _partition_sse(costs, bounds)
    trace = [sse]
    for _ in range(max_passes):
        moved = False
        for j in range(1, k):
            for step in (-1, 1):
                candidate = bounds[j] + step
                if not bounds[j - 1] < candidate < bounds[j + 1]:
                    continue
                trial = bounds[:j] + [candidate] + bounds[j + 1:]
                trial_sse = _partition_sse(costs, trial)
                if trial_sse < sse:
                    bounds, sse, moved = trial, trial_sse, True
                    trace.append(sse)
                    break
        if not moved:
            break
    if k > 1:
        exact = _optimal_bounds(costs, k)
        exact_sse = _partition_sse(costs, exact)
        if exact_sse < sse:
            bounds, sse = exact, exact_sse
            trace.append(sse)
    labels = np.repeat(np.arange(k), np.diff(bounds))
    return torch.as_tensor(labels, dtype=torch.long), trace


def cluster_means(values: torch.Tensor, labels: torch.Tensor, k: int) -> torch.Tensor:
    """Rows replaced by their cluster mean; differentiable in values"""
    sums = torch.zeros(k, values.shape[1], dtype=values.dtype, device=values.device).index_add(0, labels, values)
    counts = torch.bincount(labels, minlength=k).clamp(min=1).to(values.dtype)
    return (sums / counts[:, None])[labels]


def fc_tensor(values: torch.Tensor, method: str, cl_r: float, generator: Optional[torch.Generator]) -> torch.Tensor:
    if method not in METHODS:
        raise TransformError(f"unknown clustering method '{method}', expected one of {METHODS}")
    k = n_clusters(values.shape[0], cl_r)
    if k >= values.shape[0]:
        return values
    if method == 'kmeans':
        labels, _ = kmeans(values, k, generator)
    else:
        labels, _ = warped_kmeans(values, k)
    return cluster_means(values, labels.to(values.device), k)


def make_fc(stage: str = 'origin', method: str = 'kmeans', cl_r: Optional[float] = None,
            rng_seed: Optional[int] = None) -> Transform:
    if method not in METHODS:
        raise TransformError(f"unknown clustering method '{method}', expected one of {METHODS}")
    ratio = default_ratio(method, stage) if cl_r is None else cl_r
    if not 0 < ratio <= 1:
        raise TransformError(f"cl_r must lie in (0, 1], got {ratio}")
    return Transform('fc', {'method': method, 'cl_r': ratio},
                     lambda x, sr, g: fc_tensor(x, method, ratio, g),
                     differentiable=True, randomized=True, level='feature', stage=stage, rng_seed=rng_seed)


def fc(f: FeatureMatrix, cl_m: str = 'kmeans', cl_r: float = 0.2, rng: Optional[int] = 0) -> FeatureMatrix:
    """Compress a feature matrix in place of its stage"""
    generator = torch.Generator().manual_seed(int(rng or 0))
    return f.with_values(fc_tensor(f.values, cl_m, cl_r, generator))
