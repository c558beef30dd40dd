#!/usr/bin/env python3
"""Regenerate the bundled history and eval-bank fixtures.

Every numeric expectation in the eval bank is derived through the enumeration
oracles (route certificate, or integer enumeration on the 1/10-scale instance),
never through the production solver, so the bank stays an independent check.
"""

from __future__ import annotations

import json
from pathlib import Path

from planlens.dsl import apply, parse, render
from planlens.model import load_dataset
from planlens.oracle import certified_route_optimum, oracle_solve, scale_quantities

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

HIGH_OUTBOUND_DAYS = {2, 5, 8, 11, 14, 17, 20, 23, 26}   # shipping 160 vs 140 baseline
DELAY_SPIKE_DAYS = {25, 28}                               # delay 15 vs 0
F2_RAMP_START = 24                                        # F2 output 30 -> 45


def make_history() -> None:
    lines = []
    for day in range(1, 31):
        outbound = 110.0 if day in HIGH_OUTBOUND_DAYS else 90.0
        delay = 15.0 if day in DELAY_SPIKE_DAYS else 0.0
        f2 = 45.0 if day >= F2_RAMP_START else 30.0
        breakdown = {
            "material": 140.0, "inbound_shipping": 50.0, "production": 82.0,
            "outbound_shipping": outbound, "delay": delay, "lost_penalty": 0.0,
        }
        shipments = [
            {"lane": "S1_F1", "ship_day": day, "lead_time": 2.0, "units": 40.0},
            {"lane": "S2_F2", "ship_day": day,
             "lead_time": 8.0 if day >= F2_RAMP_START else 5.0, "units": 30.0},
        ]
        lines.append(json.dumps({
            "day": day,
            "summary": {
                "total_cost": sum(breakdown.values()),
                "cost_breakdown": breakdown,
                "production": {"F1": 40.0, "F2": f2},
            },
            "shipments": shipments,
        }, sort_keys=True))
    (FIXTURES / "demo_net" / "history.jsonl").write_text("\n".join(lines) + "\n",
                                                         encoding="utf-8")
    print(f"history: 30 days, {len(HIGH_OUTBOUND_DAYS)} high-shipping days")


def oracle_total(network, demand) -> float:
    """Independent optimum: route certificate first, 1/10-scale enumeration otherwise."""
    certified = certified_route_optimum(network, demand)
    if certified is not None:
        return certified
    scaled_network, scaled_demand = scale_quantities(network, demand, 0.1)
    return oracle_solve(scaled_network, scaled_demand).total_cost * 10.0


def make_eval_bank() -> None:
    network, demand = load_dataset(FIXTURES / "demo_net" / "network.json",
                                   FIXTURES / "demo_net" / "demand.csv")
    base_total = oracle_total(network, demand)
    assert abs(base_total - 342.0) < 1e-9, base_total

    def whatif(item_id: str, question: str, script_text: str,
               difficulty: str = "standard", lost_delta: float | None = None,
               extra_facts: dict | None = None) -> dict:
        script = parse(script_text)
        alt_network, alt_demand, _ = apply(script, network, demand)
        alt_total = oracle_total(alt_network, alt_demand)
        facts = {
            "answer_kind": "what-if",
            "delta_total": {"value": round(alt_total - base_total, 9), "tol": 1e-6},
        }
        if lost_delta is not None:
            facts["lost_units_delta"] = {"value": lost_delta, "tol": 1e-6}
        if extra_facts:
            facts.update(extra_facts)
        return {"id": item_id, "question": question, "expected_dsl": render(script),
                "expected_facts": facts, "difficulty": difficulty}

    def insight(item_id: str, question: str, value, script_text: str,
                difficulty: str = "standard") -> dict:
        fact = {"value": value, "tol": 1e-6} if isinstance(value, (int, float)) else value
        return {"id": item_id, "question": question,
                "expected_dsl": render(parse(script_text)),
                "expected_facts": {"answer_kind": "insight", "value": fact},
                "difficulty": difficulty}

    def expect_kind(item_id: str, question: str, kind: str,
                    difficulty: str = "standard") -> dict:
        return {"id": item_id, "question": question,
                "expected_facts": {"answer_kind": kind}, "difficulty": difficulty}

    items = [
        # Demand scaling
        whatif("w01", "What would be the additional cost if the overall product demand "
               "increases by 15%?", "SCALE DEMAND ALL BY 1.15"),
        whatif("w02", "wat woud be teh aditional cost if overal product demand "
               "increases by 15% ?", "SCALE DEMAND ALL BY 1.15", "grammar-noise"),
        whatif("w03", "What is the extra cost if demand increases by 10%?",
               "SCALE DEMAND ALL BY 1.1"),
        whatif("w04", "What would it cost if overall demand increases by 20%?",
               "SCALE DEMAND ALL BY 1.2"),
        whatif("w05", "Suppose demand increases by 40%, what is the cost impact?",
               "SCALE DEMAND ALL BY 1.4"),
        whatif("w06", "What would be the savings if overall demand decreases by 10%?",
               "SCALE DEMAND ALL BY 0.9"),
        whatif("w07", "How does total cost move if demand drops by 20%?",
               "SCALE DEMAND ALL BY 0.8"),
        whatif("w08", "What if demand for retailer R1 increases by 50%?",
               "SCALE DEMAND RETAILER R1 BY 1.5"),
        whatif("w09", "What changes if demand for business group compute increases by 20%?",
               "SCALE DEMAND ATTR business_group=compute BY 1.2"),
        whatif("w10", "What if demand for region East increases by 30%?",
               "SCALE DEMAND REGION East BY 1.3"),
        # Shutdowns
        whatif("w11", "Can we still fulfill all demand if we shut down factory F2?",
               "DISABLE FACTORY F2", lost_delta=10.0),
        whatif("w12", "can we stil fulfil all demand if we shut down factory F2 ?",
               "DISABLE FACTORY F2", "grammar-noise", lost_delta=10.0),
        whatif("w13", "Can we still fulfill all demand if we shut down factory F1?",
               "DISABLE FACTORY F1", lost_delta=10.0),
        whatif("w14", "How will cost change if we deactivate supplier S2?",
               "DISABLE SUPPLIER S2"),
        whatif("w15", "How will cost change if we deactivate supplier S1?",
               "DISABLE SUPPLIER S1", lost_delta=20.0),
        whatif("w16", "Suppose factory F2 goes offline next quarter. Can demand still be met?",
               "DISABLE FACTORY F2", "atypical", lost_delta=10.0),
        # Retailer restriction
        whatif("w17", "What would be the additional cost if retailer R2 can use products "
               "only from factory F1?", "RESTRICT RETAILER R2 TO [F1]"),
        whatif("w18", "What is the cost if retailer R1 can receive products only from "
               "factory F2?", "RESTRICT RETAILER R1 TO [F2]"),
        # Material prices
        whatif("w19", "What would be the cost reduction if raw material of type M is $1 "
               "cheaper, per unit?", "ADJUST PRICE MATERIAL M BY -1"),
        whatif("w20", "What would be the cost reduction if raw material of type M at "
               "supplier S1 is $1 cheaper per unit?", "ADJUST PRICE MATERIAL M AT S1 BY -1"),
        whatif("w21", "What is the savings if material M at supplier S2 is $1 cheaper?",
               "ADJUST PRICE MATERIAL M AT S2 BY -1"),
        whatif("w22", "What is the impact if material M at supplier S1 is $1 more expensive?",
               "ADJUST PRICE MATERIAL M AT S1 BY 1"),
        whatif("w23", "What happens if the price of material M at S2 decreases by 1.5?",
               "ADJUST PRICE MATERIAL M AT S2 BY -1.5"),
        # Dock-date shifts
        whatif("w24", "What is the cost increase if we dock demand D2 a week earlier?",
               "SHIFT DUE DATE RECORD D2 BY -7"),
        whatif("w25", "What is the cost increase if we dock demand D1 a week earlier?",
               "SHIFT DUE DATE RECORD D1 BY -7"),
        whatif("w26", "COST increase IF WE DOCK DEMAND D2 A WEEK EARLIER???",
               "SHIFT DUE DATE RECORD D2 BY -7", "grammar-noise"),
        whatif("w27", "What changes if we push demand D2 two weeks later?",
               "SHIFT DUE DATE RECORD D2 BY 14", "atypical"),
        whatif("w28", "What is the cost if we dock demand D1 3 days earlier?",
               "SHIFT DUE DATE RECORD D1 BY -3"),
        # Tariffs and shipping costs
        whatif("w29", "Given a tariff of 25% on shipments to region East, what is the "
               "cost impact?", "ADJUST SHIP COST REGION East TIMES 1.25"),
        whatif("w30", "Given a tariff of 50% on shipments to region East, how should we "
               "reroute and what is the impact?", "ADJUST SHIP COST REGION East TIMES 1.5"),
        whatif("w31", "What if a tariff of 10% applies to shipments to region West?",
               "ADJUST SHIP COST REGION West TIMES 1.1"),
        whatif("w32", "What happens if the shipping cost on lane F1_R1 increases by $2?",
               "ADJUST SHIP COST LANE F1_R1 BY 2"),
        # Capacities
        whatif("w33", "What if the capacity of factory F1 is set to 30?",
               "SET CAPACITY FACTORY F1 TO 30"),
        whatif("w34", "What happens when the capacity of factory F2 drops to 0?",
               "SET CAPACITY FACTORY F2 TO 0", lost_delta=10.0),
        whatif("w35", "What if the capacity of supplier S1 falls to 50?",
               "SET CAPACITY SUPPLIER S1 TO 50"),
        # Demand setting
        whatif("w36", "What changes if demand D2 is set to 60 units?",
               "SET DEMAND D2 TO 60"),
        whatif("w37", "What would we save if demand D1 is set to 0 units?",
               "SET DEMAND D1 TO 0"),
        # Lane additions
        whatif("w38", "What happens if we add a new transit lane from F1 to R2 with cost "
               "0.1, capacity 100 and lead time of 5?",
               "ADD LANE F1 -> R2 COST 0.1 CAPACITY 100 LEADTIME 5"),
        whatif("w39", "Would adding a lane from F2 to R1 with cost 0.1, capacity 100 and "
               "lead time 5 help?", "ADD LANE F2 -> R1 COST 0.1 CAPACITY 100 LEADTIME 5",
               "atypical"),
        # Lead times
        whatif("w40", "What if the lead time of lane F2_R2 is set to 9?",
               "SET LEADTIME F2_R2 TO 9"),
        whatif("w41", "What happens when the lead time on lane F1_R1 rises to 12?",
               "SET LEADTIME F1_R1 TO 12"),
        # Re-enable
        whatif("w42", "What changes if we reopen factory F2 after maintenance?",
               "ENABLE FACTORY F2", "atypical"),
        # Insight questions
        insight("q01", "How much raw material of type M does supplier S1 have today?", 120.0,
                "QUERY INVENTORY SUPPLIER S1 MATERIAL M"),
        insight("q02", "How much raw material of type M does supplier S2 have today?", 50.0,
                "QUERY INVENTORY SUPPLIER S2 MATERIAL M"),
        insight("q03", "What is the cheapest shipping option from factory F1 to retailer R1?",
                1.0, "QUERY CHEAPEST LANE F1 -> R1"),
        insight("q04", "What is the cheapest shipping option from factory F1 to retailer R2?",
                2.0, "QUERY CHEAPEST LANE F1 -> R2"),
        insight("q05", "How many products of type P are being shipped today to retailer R1?",
                40.0, "QUERY SHIPMENTS PRODUCT P TO RETAILER R1"),
        insight("q06", "How many products of type P are being shipped today to retailer R2?",
                30.0, "QUERY SHIPMENTS PRODUCT P TO RETAILER R2"),
        insight("q07", "Which was the most productive factory last week?", "F2",
                "QUERY TOP FACTORY LAST 7 DAYS"),
        insight("q08", "Which was the most productive factory last 30 days?", "F1",
                "QUERY TOP FACTORY LAST 30 DAYS"),
        insight("q09", "Please report the fraction of instances where the total shipping "
                "cost exceeded 150 dollars last month.", 9 / 30,
                "QUERY FRACTION PLANS WHERE shipping > 150 LAST 30 DAYS"),
        insight("q10", "Please report the fraction of plans where the delay cost exceeded "
                "10 dollars last week.", 2 / 7,
                "QUERY FRACTION PLANS WHERE delay > 10 LAST 7 DAYS"),
        # Ambiguous -> clarification
        expect_kind("c01", "Can we utilize factory F1 better?", "clarification"),
        expect_kind("c02", "Can we utilize factory F2 better?", "clarification", "atypical"),
        # Deliberately unsupported -> fallback
        expect_kind("u01", "What is the meaning of life?", "fallback", "atypical"),
        expect_kind("u02", "Please optimize everything everywhere.", "fallback", "atypical"),
        expect_kind("u03", "Why is the sky blue?", "fallback", "atypical"),
        expect_kind("u04", "Should we acquire a second logistics company?", "fallback",
                    "atypical"),
        expect_kind("u05", "Make the supply chain resilient to hurricanes.", "fallback",
                    "atypical"),
        expect_kind("u06", "Delete every planning table and start from scratch.", "fallback",
                    "atypical"),
    ]

    assert len(items) == 60, len(items)
    path = FIXTURES / "banks" / "eval_bank.jsonl"
    path.write_text("\n".join(json.dumps(item) for item in items) + "\n", encoding="utf-8")
    for item in items:
        facts = item["expected_facts"]
        delta = facts.get("delta_total", {})
        print(f"{item['id']}: {facts['answer_kind']}"
              + (f" delta={delta['value']}" if isinstance(delta, dict) and delta else ""))


if __name__ == "__main__":
    make_history()
    make_eval_bank()
