"""Online matching with stochastic rewards: potentials, algorithms, simulations and audits."""
from .instance import Instance, gen_cascade, gen_random, gen_upper_triangular, read_instance, validate, write_instance
from .potential import (PotentialTable, CutoffTable, f_equal, f_unequal_closed, equal_closed_table,
                        unequal_closed_table, constant_table, iterate_fg)

__all__ = [
    "Instance", "gen_cascade", "gen_random", "gen_upper_triangular", "read_instance", "validate", "write_instance",
    "PotentialTable", "CutoffTable", "f_equal", "f_unequal_closed", "equal_closed_table", "unequal_closed_table",
    "constant_table", "iterate_fg",
]
