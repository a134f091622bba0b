"""Regenerate the bundled FCIDUMP fixtures with PySCF (RHF/STO-3G).

PySCF is only needed here; the package itself never imports it.

    python tools/make_fixtures.py

Writes ``src/mlpqe/data/<name>.fcidump`` plus ``fixtures.json`` with the
reference energies PySCF reports for each geometry (nuclear repulsion, RHF,
MP2 correlation, FCI).
"""

import json
import math
from pathlib import Path

from pyscf import fci, gto, mp, scf
from pyscf.tools import fcidump

DATA = Path(__file__).resolve().parents[1] / "src" / "mlpqe" / "data"

R_OH = 0.958
ANGLE_HOH = 104.4776


def water(r_oh):
    half = math.radians(ANGLE_HOH / 2.0)
    x = r_oh * math.sin(half)
    z = r_oh * math.cos(half)
    return f"O 0 0 0; H {x:.10f} 0 {z:.10f}; H {-x:.10f} 0 {z:.10f}"


def chain(n, spacing):
    return "; ".join(f"H 0 0 {i * spacing:.10f}" for i in range(n))


GEOMETRIES = {
    "h2": ("H 0 0 0; H 0 0 0.7414", "H2 at 0.7414 A"),
    "h4_0.75": (chain(4, 0.75), "linear H4 chain, r(H-H) = 0.75 A"),
    "h4_1.50": (chain(4, 1.50), "linear H4 chain, r(H-H) = 1.50 A"),
    "h2o": (water(R_OH), f"H2O, r(O-H) = {R_OH} A, angle {ANGLE_HOH} deg"),
    "h2o_stretched": (water(1.5 * R_OH), f"H2O, r(O-H) = 1.5 x {R_OH} A, angle {ANGLE_HOH} deg"),
}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    meta = {}
    for name, (atom, note) in GEOMETRIES.items():
        mol = gto.M(atom=atom, basis="sto-3g", unit="Angstrom", symmetry=False, verbose=0)
        mf = scf.RHF(mol)
        mf.conv_tol = 1e-12
        mf.kernel()
        assert mf.converged, name
        fcidump.from_scf(mf, str(DATA / f"{name}.fcidump"), tol=1e-15, float_format=" %.17g")
        e_mp2 = mp.MP2(mf).kernel()[0]
        cis = fci.FCI(mf)
        cis.conv_tol = 1e-12
        e_fci = cis.kernel()[0]
        meta[name] = {
            "description": note,
            "atom": atom,
            "basis": "sto-3g",
            "n_spatial": int(mol.nao),
            "n_electrons": int(mol.nelectron),
            "nuclear_repulsion": float(mol.energy_nuc()),
            "e_hf": float(mf.e_tot),
            "e_mp2_corr": float(e_mp2),
            "e_fci": float(e_fci),
        }
        print(f"{name:15s} norb={mol.nao} nelec={mol.nelectron} "
              f"E_HF={mf.e_tot:.10f} E_FCI={e_fci:.10f}")
    meta["_generator"] = "PySCF RHF/STO-3G, tools/make_fixtures.py"
    (DATA / "fixtures.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
