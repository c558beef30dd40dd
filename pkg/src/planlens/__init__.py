"""planlens: what-if engine for supply-chain plans.

Load a supplier->factory->retailer network and a demand plan, solve the
cost-minimizing fulfillment plan, then interrogate it: scenario edits in a
small script language, natural-language questions through a pluggable
translator, demand-drift reports, and an evaluation harness.
"""

from .model import (
    DemandPlan,
    DemandRecord,
    Factory,
    Lane,
    Material,
    Product,
    Retailer,
    Supplier,
    SupplyNetwork,
    load_dataset,
    validate,
)
from .solver import FulfillmentPlan, PlanDiff, diff_plans, solve

__version__ = "0.1.0"

__all__ = [
    "Material", "Product", "Supplier", "Factory", "Retailer", "Lane",
    "SupplyNetwork", "DemandRecord", "DemandPlan",
    "load_dataset", "validate", "solve", "diff_plans",
    "FulfillmentPlan", "PlanDiff",
    "__version__",
]
