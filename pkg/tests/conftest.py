import numpy as np
import pytest

from kreinlab import (ExtensionSpec, assemble_extension, assemble_stiffness_mass, build_mesh,
                      deficiency_basis)


@pytest.fixture(scope="session")
def small_mesh():
    return build_mesh(10.0, 200, 3.0)


@pytest.fixture(scope="session")
def reference_mesh():
    return build_mesh(10.0, 2000, 3.0)


@pytest.fixture(scope="session")
def small_setup(small_mesh):
    fr, Ma = assemble_stiffness_mass(small_mesh)
    defi = deficiency_basis(small_mesh, -1.0)
    ops = {
        "friedrichs": assemble_extension(fr, defi, ExtensionSpec.friedrichs()),
        "krein": assemble_extension(fr, defi, ExtensionSpec.krein(-1.0)),
        "general": assemble_extension(fr, defi, ExtensionSpec.general(-1.0, np.eye(2), np.eye(2))),
    }
    return small_mesh, fr, defi, ops


@pytest.fixture(scope="session")
def reference_setup(reference_mesh):
    fr, Ma = assemble_stiffness_mass(reference_mesh)
    defi = deficiency_basis(reference_mesh, -1.0)
    ops = {
        "friedrichs": assemble_extension(fr, defi, ExtensionSpec.friedrichs()),
        "krein": assemble_extension(fr, defi, ExtensionSpec.krein(-1.0)),
    }
    return reference_mesh, fr, defi, ops
