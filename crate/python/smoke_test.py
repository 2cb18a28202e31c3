"""Quick check that the pytreegs extension imports and runs end to end."""

import math

import pytreegs


def main():
    mesh = pytreegs.Mesh("unrooted", depth=4, nodes_per_edge=8)
    lam = mesh.lambda1()
    assert 0.0 < lam < 1.0, lam

    state = mesh.minimize(p=4.0, mu=2.0)
    assert state.converged
    assert math.isclose(state.mass, 2.0, rel_tol=1e-9)
    assert min(state.values) >= 0.0
    report = mesh.energy(state.values, 4.0)
    assert math.isclose(report["energy"], state.energy, rel_tol=1e-9, abs_tol=1e-12)

    grid = pytreegs.RadialGrid("rooted", depth=20, nodes_per_edge=8)
    radial = grid.minimize(p=4.0, mu=3.0)
    assert radial.converged
    shot = grid.shooting(radial)
    assert math.isfinite(shot["max_deviation"]) and not shot["diverged"], shot

    curve = pytreegs.level_sweep(4.0, [1.0, 2.0, 3.0], depth=20, radial=True)
    assert len(curve["points"]) == 3

    check = pytreegs.verify("symmetrize", samples=20)
    assert all(c["passed"] for c in check["checks"]), check

    try:
        pytreegs.Mesh("sideways")
    except ValueError:
        pass
    else:
        raise AssertionError("bad tree kind accepted")

    print(f"ok: lambda1={lam:.6f} E(2)={state.energy:.6f} radial E(3)={radial.energy:.6f}")


if __name__ == "__main__":
    main()
