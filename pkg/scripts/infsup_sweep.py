import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from catalog import BENCHMARKS, build_problem  # noqa: E402
from discretization import assemble_system, build_mesh  # noqa: E402
from errors import EipError  # noqa: E402
from models import parse_config  # noqa: E402
from solver import dense_svd_inf_sup, discrete_inf_sup  # noqa: E402


def main():
    target = sys.argv[1] if len(sys.argv) > 1 else 'heat'
    if target in BENCHMARKS:
        problem = BENCHMARKS[target]()
    else:
        problem = build_problem(parse_config(target))
    print(f"Sweep {problem.name or target}: {problem.motion.family.value}, boundary={problem.boundary}")
    for n in (4, 8, 16):
        try:
            mesh = build_mesh(n, n, problem.motion, boundary=problem.boundary)
            system = assemble_system(mesh, problem)
            c_bh = discrete_inf_sup(system)
            line = f"  {n:>3}x{n:<3} dim={mesh.trial_dim:<5} c_Bh={c_bh:.10f}"
            if n == 4:
                line += f" svd={dense_svd_inf_sup(system):.10f}"
            print(line)
        except EipError as exc:
            print('Sweep error:', exc)


if __name__ == '__main__':
    main()
