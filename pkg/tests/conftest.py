import numpy as np
import pytest

import vibench as vb


@pytest.fixture(params=vb.available_backends())
def backend(request):
    """Run the test once per available execution backend."""
    return request.param


def sort_threshold_projection(v):
    """Independent simplex-projection oracle: sort, prefix sums, threshold.

    Finds tau with sum(max(v_i - tau, 0)) = 1 from the sorted values, the
    O(d log d) textbook method.  Kept independent of the library's scan.
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, len(v) + 1)
    taus = (css - 1.0) / ks
    valid = u - taus > 0
    k_star = int(np.nonzero(valid)[0].max())
    return np.maximum(v - taus[k_star], 0.0)


def gap_vertex_scan(A, z):
    """Exhaustive merit-function oracle over all vertex pairs.

    Evaluates <F(u), z - u> for every u = (e_i, e_j) and returns the
    maximum; for a bilinear game over simplices this is the duality gap.
    """
    A = np.asarray(A, dtype=np.float64)
    d = A.shape[0]
    best = -np.inf
    for i in range(d):
        for j in range(d):
            u = np.zeros(2 * d)
            u[i] = 1.0
            u[d + j] = 1.0
            fu = np.concatenate([A @ u[d:], -(A.T @ u[:d])])
            best = max(best, float(fu @ (z - u)))
    return best


def linear_finite_sum(rng, dim=4, num_components=5):
    """Random linear finite-sum problem with exact per-component constants.

    Components F_j(z) = B_j z + c_j with unconstrained g; the Lipschitz
    constants are spectral norms computed by SVD (test-side oracle).
    """
    mats = [rng.standard_normal((dim, dim)) for _ in range(num_components)]
    offs = [rng.standard_normal(dim) for _ in range(num_components)]
    mean_mat = sum(mats) / num_components
    mean_off = sum(offs) / num_components
    per = [float(np.linalg.svd(B, compute_uv=False)[0]) for B in mats]
    l_full = min(float(np.linalg.svd(mean_mat, compute_uv=False)[0]),
                 float(np.sqrt(np.mean(np.square(per)))))
    lip = vb.LipschitzData.from_components(l_full, per)
    return vb.FiniteSumProblem(
        dim=dim,
        num_components=num_components,
        component_eval=lambda j, z: mats[j] @ z + offs[j],
        full_eval=lambda z: mean_mat @ z + mean_off,
        prox=vb.zero_function(),
        lipschitz=lip,
    )


def scalar_problem(slope=1.0):
    """One-dimensional F(x) = slope * x with g = 0 and a single component."""
    s = float(slope)
    return vb.FiniteSumProblem(
        dim=1,
        num_components=1,
        component_eval=lambda j, z: s * z,
        full_eval=lambda z: s * z,
        prox=vb.zero_function(),
        lipschitz=vb.LipschitzData.from_components(abs(s), [abs(s)]),
    )


def strip_elapsed(text):
    """Drop the elapsed_ms column from trace CSV text (non-deterministic)."""
    out = []
    for line in text.splitlines():
        if line.startswith("#") or line.startswith("iter,"):
            out.append(line)
        else:
            out.append(line.rsplit(",", 1)[0])
    return "\n".join(out)
