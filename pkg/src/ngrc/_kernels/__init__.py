"""Backend dispatch for the numerical kernels.

The compiled extension is optional; the pure NumPy module implements the
same functions with the same arithmetic. NGRC_BACKEND picks one:

  auto      compiled if available, else pure (default)
  compiled  require the extension, fail loudly if missing
  pure      skip the extension even when built
"""

import os

_choice = os.environ.get("NGRC_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "pure"):
    raise ImportError(
        "NGRC_BACKEND must be 'auto', 'compiled' or 'pure', got %r" % _choice
    )

if _choice == "pure":
    from ngrc._kernels import pure as _impl
else:
    try:
        from ngrc._kernels import _core as _impl
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "NGRC_BACKEND=compiled but the ngrc._kernels._core extension "
                "is not built; reinstall with a C compiler available"
            )
        from ngrc._kernels import pure as _impl

BACKEND = _impl.BACKEND
apply_pairs = _impl.apply_pairs
apply_pairs_batch = _impl.apply_pairs_batch
integrate_lorenz = _impl.integrate_lorenz
integrate_rossler = _impl.integrate_rossler
integrate_rossler_ou = _impl.integrate_rossler_ou
