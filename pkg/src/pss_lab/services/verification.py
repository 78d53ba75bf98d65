"""
Symbolic verification suite for Pseudospherical Lab
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional

from ..config import settings
from ..errors import ParameterError
from ..models.schemas import Expansion, Family, VerificationReport
from .checks import exact_check, predicate_check
from .jetring import const, u
from .pseudopot import (
    check_exactness,
    check_flow_identity_implies_pde,
    riccati_report,
    verify_hierarchy,
)
from .pssforms import (
    exponential_family_check,
    family_forms_check,
    family_instantiation_check,
    structure_report,
)

logger = logging.getLogger(__name__)

BRANCHES = (1, -1)


class VerificationSuite:
    """Runs every exact identity and collects one report"""

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads

    def _tasks(self, kmax: int) -> List[Callable[[], VerificationReport]]:
        tasks: List[Callable[[], VerificationReport]] = []
        for branch in BRANCHES:
            tasks.append(lambda b=branch: structure_report(b))
            tasks.append(lambda b=branch: family_instantiation_check(b))
            tasks.append(lambda b=branch: family_forms_check(b))
            tasks.append(lambda b=branch: riccati_report(b))
        tasks.append(exponential_family_check)
        tasks.append(self.flow_identity_report)
        tasks.append(lambda: verify_hierarchy(Expansion.NEGATIVE, kmax))
        tasks.append(lambda: verify_hierarchy(Expansion.POSITIVE, kmax))
        tasks.append(self.mutation_report)
        for k in range(2, kmax + 1):
            tasks.append(lambda k=k: check_exactness(Family.NEG, k))
        for k in range(1, kmax + 1):
            tasks.append(lambda k=k: check_exactness(Family.POS, k))
        return tasks

    def flow_identity_report(self) -> VerificationReport:
        return VerificationReport(
            suite="flow-identity",
            checks=[exact_check("flow-identity-implies-pde", "flow-implies-equation",
                                check_flow_identity_implies_pde())],
        )

    def mutation_report(self) -> VerificationReport:
        """Each hierarchy must reject a term with its E factor dropped"""
        w = u(1) - u(0) - 1
        v = u(0) - u(1) + 1
        mutants = {
            Expansion.NEGATIVE: (2, w ** (-2)),
            Expansion.POSITIVE: (1, const(1) / 2 * v),
        }
        checks = []
        for expansion, (k, term) in mutants.items():
            report = verify_hierarchy(expansion, 2, overrides={k: term})
            name = f"x-recursion[{expansion.value},k={k}]"
            caught = name in report.failed()
            checks.append(predicate_check(
                f"mutation-detected[{expansion.value}]",
                f"hierarchy-{expansion.value}",
                caught,
                details={"mutated_term": k},
            ))
        return VerificationReport(suite="mutation", checks=checks)

    def run(self, kmax: int = settings.kmax) -> VerificationReport:
        """
        Run the symbolic suite

        Args:
            kmax: Highest hierarchy and conservation index (>= 2)

        Returns:
            Merged VerificationReport named "verify"
        """
        if kmax < 2:
            raise ParameterError(f"kmax must be >= 2, got {kmax}")
        started = time.perf_counter()
        tasks = self._tasks(kmax)
        workers = max(1, self.threads or settings.threads)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(lambda task: task(), tasks))
        merged = VerificationReport.merge("verify", reports)
        logger.info(
            "Verified %d identities in %.1fs (%d failed)",
            len(merged.checks), time.perf_counter() - started, len(merged.failed()),
        )
        return merged

