"""
Sequence Completion

Fill the frames between keyframes.

STRATEGIES:
----------
- bidirectional:   run a forward chain from the start keyframe and a
                   backward chain from the end keyframe, stitch them where
                   they agree best, optionally cross-fading around the seam.
- optimized:       search the forward chain's initial LSTM state with
                   CMA-ES so the rollout lands on the end keyframe.
- baseline-linear: straight interpolation in feature space.

Every strategy returns the keyframes themselves as first and last frame.
A segment of length n counts both keyframes, so n − 2 frames are new.

USAGE:
-----
    request = CompletionRequest(start, end, length=24, strategy="bidirectional")
    result = complete(model, request, context.topology)
    result.features   # list of n normalized N×9 arrays
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import cma
import numpy as np

from ..autodiff.engine import no_grad
from ..errors import DatasetError, NormalizationError, ShapeMismatchError
from ..geometry.codec import FeatureFrame
from ..geometry.context import CodecContext
from ..geometry.mesh import Mesh, Topology
from ..network.generator import rollout
from ..network.model import ChainState, GeneratorModel
from ..training.trainer import bidirectional_rollout

logger = logging.getLogger(__name__)

STRATEGIES = ("bidirectional", "optimized", "baseline-linear")
DIVERSITY_SCALE = 0.1


@dataclass(frozen=True)
class CompletionRequest:
    start: np.ndarray
    end: np.ndarray
    length: int
    strategy: str = "bidirectional"
    diversity_seed: Optional[int] = None
    blend_width: int = 0

    def __post_init__(self):
        object.__setattr__(self, "start", np.asarray(self.start, dtype=np.float64))
        object.__setattr__(self, "end", np.asarray(self.end, dtype=np.float64))
        if self.length < 2:
            raise DatasetError("a completion segment needs at least 2 frames")
        if self.start.shape != self.end.shape:
            raise ShapeMismatchError("start and end keyframes differ in shape")
        if self.blend_width < 0:
            raise DatasetError("blend width must be non-negative")
        if self.strategy not in STRATEGIES:
            raise DatasetError(f"unknown completion strategy '{self.strategy}'")


@dataclass
class CompletionResult:
    features: list
    stitch_index: Optional[int] = None
    objective: Optional[float] = None


@dataclass(frozen=True)
class CMAConfig:
    population: int = 16
    sigma0: float = 0.05
    generations: int = 200
    seed: int = 0
    target: float = 1e-4


def _pin_endpoints_(features: list, request: CompletionRequest) -> list:
    features[0] = request.start.copy()
    features[-1] = request.end.copy()
    return features


def _start_state_(model: GeneratorModel, request: CompletionRequest, initial_state: float) -> ChainState:
    state = model.initial_state(initial_state)
    if request.diversity_seed is None:
        return state
    rng = np.random.default_rng(request.diversity_seed)
    vector = state.to_vector()
    return ChainState.from_vector(model.config, vector + rng.normal(0.0, DIVERSITY_SCALE, vector.shape))


def complete_bidirectional(
    model: GeneratorModel,
    request: CompletionRequest,
    topology: Topology,
    initial_state: float = 0.1,
) -> CompletionResult:
    """
    Stitch index i* = argmin_i ‖S_f[i] − S_b[n+1−i]‖ (first minimum wins);
    output S_f[1..i*] followed by S_b[n−i*..1].

    A blend width w cross-fades the w interior frames around the seam from
    the forward to the backward chain.
    """
    n = request.length
    seed = request.diversity_seed
    rng = np.random.default_rng(seed) if seed is not None else None
    with no_grad():
        forward, backward = bidirectional_rollout(
            request.start, request.end, n, model, topology, initial_state,
            sample=seed is not None, rng=rng,
            forward_state=_start_state_(model, request, initial_state),
        )
    f = [t.data for t in forward]
    b = [t.data for t in backward]

    gaps = [float(np.mean((f[i] - b[n - 1 - i]) ** 2)) for i in range(n)]
    stitch = int(np.argmin(gaps))
    features = [f[t] if t <= stitch else b[n - 1 - t] for t in range(n)]

    w = request.blend_width
    if w:
        first = max(1, stitch - w // 2 + 1)
        blend = range(first, min(n - 1, first + w))
        for k, t in enumerate(blend):
            alpha = 1.0 - (k + 1) / (len(blend) + 1)
            features[t] = alpha * f[t] + (1.0 - alpha) * b[n - 1 - t]

    logger.debug("Bidirectional stitch at frame %d of %d", stitch + 1, n)
    return CompletionResult(features=_pin_endpoints_(features, request), stitch_index=stitch + 1)


def minimize_cma(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    sigma0: float,
    population: int,
    generations: int,
    seed: int = 0,
) -> tuple[np.ndarray, float]:
    """
    CMA-ES minimization returning the best point ever evaluated, x0 included,
    so the result never scores worse than the start.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    best_x, best_f = x0.copy(), float(objective(x0))
    options = {
        "popsize": population,
        "maxiter": generations,
        "seed": seed + 1,  # pycma treats 0 as "seed from time"
        "verbose": -9,
    }
    es = cma.CMAEvolutionStrategy(x0, sigma0, options)
    while not es.stop():
        candidates = es.ask()
        values = []
        for candidate in candidates:
            value = float(objective(np.asarray(candidate)))
            values.append(value if np.isfinite(value) else 1e30)
        es.tell(candidates, values)
        index = int(np.argmin(values))
        if values[index] < best_f:
            best_x, best_f = np.array(candidates[index]), values[index]
    logger.debug("CMA-ES stopped after %d generations at %.3e", es.countiter, best_f)
    return best_x, best_f


def complete_optimized(
    model: GeneratorModel,
    request: CompletionRequest,
    topology: Topology,
    settings: CMAConfig = CMAConfig(),
    initial_state: float = 0.1,
) -> CompletionResult:
    """
    Search s_0 minimizing ‖X̂_n − X_n‖ where X̂_n is reached after n − 1
    generator steps from the start keyframe.
    """
    steps = request.length - 1
    x0 = _start_state_(model, request, initial_state).to_vector()

    def landing(vector: np.ndarray) -> list:
        with no_grad():
            state = ChainState.from_vector(model.config, vector)
            return rollout([request.start], steps, state, model, topology)

    def objective(vector: np.ndarray) -> float:
        return float(np.mean((landing(vector)[-1].data - request.end) ** 2))

    seed = settings.seed if request.diversity_seed is None else request.diversity_seed
    best_x, best_f = minimize_cma(
        objective, x0, settings.sigma0, settings.population, settings.generations, seed
    )
    if best_f > settings.target:
        logger.warning("CMA-ES stopped at %.3e, above target %.1e", best_f, settings.target)

    frames = [t.data for t in landing(best_x)]
    features = [request.start] + frames[:-1] + [request.end]
    return CompletionResult(features=_pin_endpoints_(features, request), objective=best_f)


def baseline_linear(
    x1: np.ndarray, x2: np.ndarray, horizon: int, mode: str = "extrapolate"
) -> list[np.ndarray]:
    """
    extrapolate: frames t = 3 .. horizon + 2 of the line through X_1 (t=1) and X_2 (t=2).
    interpolate: `horizon` frames from X_1 to X_2 inclusive.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    step = x2 - x1
    if mode == "extrapolate":
        return [x1 + (t - 1) * step for t in range(3, horizon + 3)]
    if mode == "interpolate":
        if horizon < 2:
            raise DatasetError("interpolation needs at least 2 frames")
        return [x1 + (k / (horizon - 1)) * step for k in range(horizon)]
    raise DatasetError(f"unknown baseline mode '{mode}'")


def complete_linear(request: CompletionRequest) -> CompletionResult:
    features = baseline_linear(request.start, request.end, request.length, "interpolate")
    return CompletionResult(features=_pin_endpoints_(features, request))


def complete(
    model: Optional[GeneratorModel],
    request: CompletionRequest,
    topology: Topology,
    settings: CMAConfig = CMAConfig(),
    initial_state: float = 0.1,
) -> CompletionResult:
    if request.strategy == "baseline-linear":
        return complete_linear(request)
    if model is None:
        raise DatasetError(f"strategy '{request.strategy}' needs a trained model")
    if request.strategy == "optimized":
        return complete_optimized(model, request, topology, settings, initial_state)
    return complete_bidirectional(model, request, topology, initial_state)


def complete_keyframes(
    model: Optional[GeneratorModel],
    keyframes: Sequence[np.ndarray],
    segment_lengths: Sequence[int],
    topology: Topology,
    strategy: str = "bidirectional",
    diversity_seed: Optional[int] = None,
    blend_width: int = 0,
    settings: CMAConfig = CMAConfig(),
    initial_state: float = 0.1,
) -> list[np.ndarray]:
    """
    Complete consecutive keyframe pairs and join them; shared keyframes
    appear once.
    """
    if len(keyframes) < 2:
        raise DatasetError("at least two keyframes are required")
    if len(segment_lengths) != len(keyframes) - 1:
        raise DatasetError(
            f"{len(keyframes)} keyframes need {len(keyframes) - 1} segment lengths"
        )
    joined = [np.asarray(keyframes[0], dtype=np.float64).copy()]
    for index, length in enumerate(segment_lengths):
        request = CompletionRequest(
            keyframes[index], keyframes[index + 1], length, strategy, diversity_seed, blend_width
        )
        joined += complete(model, request, topology, settings, initial_state).features[1:]
    return joined


def complete_meshes(
    model: Optional[GeneratorModel],
    keyframes: Sequence[Mesh],
    segment_lengths: Sequence[int],
    context: CodecContext,
    strategy: str = "bidirectional",
    diversity_seed: Optional[int] = None,
    blend_width: int = 0,
    settings: CMAConfig = CMAConfig(),
    initial_state: float = 0.1,
) -> list[Mesh]:
    """
    Mesh-level completion. Keyframe meshes are returned unchanged; interior
    frames anchor vertex 0 on the line between the surrounding keyframes.

    Raises:
        NormalizationError: a model strategy without normalization parameters
        DatasetError: segment and keyframe counts disagree
    """
    normalized = context.normalization is not None
    if strategy != "baseline-linear" and not normalized:
        raise NormalizationError(
            f"strategy '{strategy}' feeds the model normalized features; no normalization given"
        )
    encoded = [frame.features for frame in context.encode_sequence(keyframes, normalize=normalized)]
    features = complete_keyframes(
        model, encoded, segment_lengths, context.topology, strategy,
        diversity_seed, blend_width, settings, initial_state,
    )

    meshes = [keyframes[0]]
    offset = 0
    for index, length in enumerate(segment_lengths):
        a = keyframes[index].vertices[0]
        b = keyframes[index + 1].vertices[0]
        for k in range(1, length - 1):
            anchor = a + (k / (length - 1)) * (b - a)
            frame = FeatureFrame(features[offset + k], normalized=normalized)
            meshes.append(context.decode_mesh(frame, anchor))
        meshes.append(keyframes[index + 1])
        offset += length - 1
    logger.info("Completed %d frames across %d segments", len(meshes), len(segment_lengths))
    return meshes
