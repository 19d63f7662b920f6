from fastapi import APIRouter, Depends, HTTPException

from app.core.config import Settings, get_settings
from app.core.errors import AnalysisError, ConfigError, KickedRotorError, ParameterError
from app.models.results import resonant_peak_energy
from app.models.schemas import EnergyRequest, EnergyResponse, KickParams, ScanConfig, ScanResponse, ScanRowResponse
from app.services import eclassical, quantum
from app.services.scan import ScanService

router = APIRouter()


def _as_http(e: KickedRotorError) -> HTTPException:
    if isinstance(e, (ParameterError, ConfigError)):
        status = 422
    elif isinstance(e, AnalysisError):
        status = 409
    else:
        status = 500
    return HTTPException(status_code=status, detail=e.to_dict())


def _check_budget(atoms: int, settings: Settings) -> None:
    if atoms > settings.API_MAX_ATOMS:
        raise HTTPException(
            status_code=422,
            detail={"error": "invalid-parameter",
                    "message": f"{atoms} atoms exceeds the per-request limit of {settings.API_MAX_ATOMS}"},
        )


@router.post("/energy", response_model=EnergyResponse)
def energy(request: EnergyRequest, settings: Settings = Depends(get_settings)):
    """Ensemble mean energy gain at one kbar with either engine."""
    _check_budget(request.ensemble.atom_count * request.trajectories_per_atom, settings)
    try:
        params = KickParams(k=request.k, kbar=request.kbar, kicks=request.kicks)
        if request.engine == "quantum":
            estimate = quantum.ensemble_energy(request.ensemble, params, request.noise)
        else:
            estimate = eclassical.ensemble_energy_map(request.ensemble, request.k, request.kbar, request.kicks,
                                                      request.trajectories_per_atom)
    except KickedRotorError as e:
        raise _as_http(e)
    peak = resonant_peak_energy(request.k, request.kicks)
    return EnergyResponse(
        engine=request.engine,
        epsilon=params.epsilon,
        ell=params.ell,
        mean_energy=estimate.mean,
        stderr=estimate.stderr,
        ratio=estimate.mean / peak if peak > 0 else None,
    )


@router.post("/scan", response_model=ScanResponse)
def scan(config: ScanConfig, settings: Settings = Depends(get_settings)):
    """Run a scan synchronously; nothing is written to disk."""
    engines = config.engines()
    if "quantum" in engines:
        _check_budget(config.ensemble.atom_count, settings)
    if "eclassical" in engines:
        _check_budget(config.eclassical_atoms * config.trajectories_per_atom, settings)
    try:
        result = ScanService(config, threads=settings.SCAN_THREADS).run()
    except KickedRotorError as e:
        raise _as_http(e)
    rows = [
        ScanRowResponse(
            kbar=float(r.kbar), epsilon=float(r.epsilon), period_us=float(r.period_us), kicks=int(r.kicks),
            engine=str(r.engine), mean_energy=float(r.mean_energy), ratio=float(r.ratio), stderr=float(r.stderr),
            atoms=int(r.atoms), seed=int(r.seed),
        )
        for r in result.table.itertuples(index=False)
    ]
    return ScanResponse(config_hash=result.config_hash, k=result.k, rows=rows)
