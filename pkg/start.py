#!/usr/bin/env python
"""Launch the simulator API under uvicorn from the repository root."""
import argparse
import os
import sys

ROOT = os.path.dirname(os.path.abspath(__file__))


def serve(argv=None) -> int:
    os.chdir(ROOT)
    if ROOT not in sys.path:
        sys.path.insert(0, ROOT)
    os.environ["PYTHONPATH"] = ROOT + os.pathsep + os.environ.get("PYTHONPATH", "")

    import uvicorn

    from app.core.config import get_settings

    settings = get_settings()
    parser = argparse.ArgumentParser(description="Kicked rotor simulator API")
    parser.add_argument("--host", default=settings.HOST)
    parser.add_argument("--port", type=int, default=settings.PORT)
    parser.add_argument("--reload", action="store_true", default=settings.DEBUG)
    args = parser.parse_args(argv)

    try:
        from app.main import app  # noqa: F401  (fail fast on import errors)
    except ImportError as e:
        print(f"ERROR: Cannot import app module: {e}", file=sys.stderr)
        return 1

    print(f"Serving on http://{args.host}:{args.port} (docs at /docs), scan threads: {settings.SCAN_THREADS}")
    uvicorn.run("app.main:app", host=args.host, port=args.port, reload=args.reload)
    return 0


if __name__ == "__main__":
    sys.exit(serve())
