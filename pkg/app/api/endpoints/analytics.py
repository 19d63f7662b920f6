import math

from fastapi import APIRouter, HTTPException, Query

from app.core.errors import KickedRotorError, ParameterError
from app.models.schemas import GFunctionRequest, GFunctionResponse, SidePeakResponse, TResResponse
from app.services import gfunction, pendulum

router = APIRouter()


def _as_http(e: KickedRotorError) -> HTTPException:
    status = 422 if isinstance(e, ParameterError) else 500
    return HTTPException(status_code=status, detail=e.to_dict())


@router.get("/t-res", response_model=TResResponse)
def resonance_time(k: float = Query(..., gt=0), epsilon: float = Query(...)):
    """Resonance time scale and the scaled time advanced per kick."""
    try:
        t = pendulum.t_res(k, epsilon)
    except KickedRotorError as e:
        raise _as_http(e)
    return TResResponse(t_res=t, x_per_kick=1.0 / t)


@router.get("/side-peak", response_model=SidePeakResponse)
def side_peak(
    t: int = Query(..., ge=1),
    k: float = Query(..., gt=0),
    x0: float = Query(gfunction.SIDE_PEAK_X0, gt=0),
    ell: int = Query(1, ge=1),
):
    try:
        eps = gfunction.predict_side_peak(t, k, x0)
        left, right = gfunction.side_peak_kbars(t, k, ell, x0)
    except KickedRotorError as e:
        raise _as_http(e)
    return SidePeakResponse(abs_epsilon=eps, kbar_left=left, kbar_right=right)


@router.post("/g-function", response_model=GFunctionResponse)
def g_function(request: GFunctionRequest):
    """G(x) by direct quadrature, with the energy ratio where x > 0."""
    try:
        g = gfunction.evaluate_g(request.x, n_theta=request.n_theta, nodes_per_panel=request.nodes_per_panel)
        ratio = []
        for x, gx in zip(request.x, g):
            if x <= 0:
                ratio.append(None)
                continue
            value = 4.0 / (math.pi * x) * gx
            if request.full_form:
                value += gfunction.free_rotor_background(x)
            ratio.append(float(value))
    except KickedRotorError as e:
        raise _as_http(e)
    return GFunctionResponse(x=list(request.x), g=[float(v) for v in g], ratio=ratio)
