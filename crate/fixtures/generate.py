"""Regenerate the FCIDUMP fixtures and their reference-energy sidecars.

Requires PySCF. Integrals are written in the canonical RHF molecular-orbital
basis; the sidecar pins the RHF total energy and the FCI ground-state energy.
"""
import json
import os

from pyscf import fci, gto, scf
from pyscf.tools import fcidump

HERE = os.path.dirname(os.path.abspath(__file__))

SYSTEMS = [
    ("h2_631g_0.7", "H 0 0 0; H 0 0 0.7", "6-31g", 0.7),
    ("h2_631g_1.4", "H 0 0 0; H 0 0 1.4", "6-31g", 1.4),
    ("h2_631g_2.8", "H 0 0 0; H 0 0 2.8", "6-31g", 2.8),
    ("lih_sto3g_3.0", "Li 0 0 0; H 0 0 3.0", "sto-3g", 3.0),
]


def main():
    for name, atom, basis, r in SYSTEMS:
        mol = gto.M(atom=atom, basis=basis, unit="Bohr", verbose=0)
        mf = scf.RHF(mol)
        mf.conv_tol = 1e-12
        mf.kernel()
        assert mf.converged, name
        path = os.path.join(HERE, name + ".fcidump")
        fcidump.from_scf(mf, path, tol=1e-15)
        cis = fci.FCI(mf)
        e_fci = cis.kernel()[0]
        side = {
            "molecule": atom,
            "basis": basis,
            "bond_length_bohr": r,
            "norb": int(mol.nao),
            "nelec": int(mol.nelectron),
            "nuclear_repulsion": float(mol.energy_nuc()),
            "rhf_total_energy": float(mf.e_tot),
            "fci_ground_energy": float(e_fci),
            "orbital_energies": [float(e) for e in mf.mo_energy],
        }
        with open(os.path.join(HERE, name + ".json"), "w") as fh:
            json.dump(side, fh, indent=2)
            fh.write("\n")


if __name__ == "__main__":
    main()
