"""Factory for creating hedging models from roster names."""

from typing import Any, Dict, Optional

from src.errors import ConfigurationError, ParameterError
from src.simkit import HestonParams
from .interface import HedgeModel, FitResult
from .baseline import ZeroHedge, BsDeltaHedge, FixedHedge
from .sensitivity import LinearHedge, parse_sensitivities
from .hull_white import HullWhiteHedge
from .semilinear import SemiLinearHedge
from .heston_implied import HestonAdjustedHedge, DeltaVegaNeutralHedge

DISPLAY_NAMES = {
    'zero': 'Zero hedge',
    'bs_delta': 'BS Delta',
    'fixed': 'Fixed 0.9/1.1',
    'hull_white': 'Hull-White',
    'relaxed_hull_white': 'Relaxed Hull-White',
    'semilinear_1': 'Semi-linear 1',
    'semilinear_2': 'Semi-linear 2',
    'heston_adjusted': 'Heston-adjusted Delta',
    'delta_vega_neutral': 'Delta-Vega-neutral',
}


def display_name(name: str) -> str:
    """'delta_vega_vanna' -> 'Delta-Vega-Vanna', single sensitivities get '-only'."""
    if name in DISPLAY_NAMES:
        return DISPLAY_NAMES[name]
    try:
        parts = parse_sensitivities(name)
    except ParameterError:
        return name
    label = '-'.join(p.capitalize() for p in parts)
    return f"{label}-only" if len(parts) == 1 else label


def create_hedger(
    name: str,
    intercept: bool = False,
    fixed_call: float = 0.9,
    fixed_put: float = 1.1,
    heston: Optional[HestonParams] = None,
) -> HedgeModel:
    """Create a hedging model by roster name.

    Args:
        name: zero, bs_delta, fixed, hull_white, relaxed_hull_white,
            semilinear_1, semilinear_2, heston_adjusted, delta_vega_neutral,
            or any underscore-joined subset of delta/vega/gamma/vanna
        intercept: Add an intercept to sensitivity regressions
        fixed_call: Call factor of the fixed hedge
        fixed_put: Put factor of the fixed hedge
        heston: Data-generating parameters, required by the Heston hedges

    Raises:
        ConfigurationError: Unknown name, or a Heston hedge without parameters

    Example:
        model = create_hedger("delta_vega_vanna")
        model.fit(train)
        ratios = model.hedge_ratio(test)
    """
    if name == 'zero':
        return ZeroHedge()
    if name == 'bs_delta':
        return BsDeltaHedge()
    if name == 'fixed':
        return FixedHedge(f_call=fixed_call, f_put=fixed_put)
    if name in ('hull_white', 'relaxed_hull_white'):
        return HullWhiteHedge(name, relaxed=name.startswith('relaxed'))
    if name in ('semilinear_1', 'semilinear_2'):
        return SemiLinearHedge(name, kind=int(name[-1]))
    if name in ('heston_adjusted', 'delta_vega_neutral'):
        if heston is None:
            raise ConfigurationError(f"{name} needs Heston parameters (simulation.model = 'heston')")
        cls = HestonAdjustedHedge if name == 'heston_adjusted' else DeltaVegaNeutralHedge
        return cls(name, heston)
    try:
        return LinearHedge(name, intercept=intercept)
    except ParameterError as e:
        raise ConfigurationError(f"Unknown hedging model {name!r}") from e


def load_hedger(data: Dict[str, Any]) -> HedgeModel:
    """Rebuild a model from its to_dict() document."""
    params = data.get('params', {})
    heston = HestonParams(**params['heston']) if 'heston' in params else None
    model = create_hedger(
        data['name'],
        intercept=params.get('intercept', False),
        fixed_call=params.get('f_call', 0.9),
        fixed_put=params.get('f_put', 1.1),
        heston=heston,
    )
    model.window_id = data.get('window_id')
    model.fits = {cls: FitResult.from_dict(fit) for cls, fit in data.get('fits', {}).items()}
    return model
