#!/usr/bin/env python3
"""Writes the bundled demo scenario: data/demo_config.json and data/demo_snapshot.json.

Four collateral assets, 240 borrowers with health factors spread over (1, 2],
and a reserve $1M above target, so absorbed collateral only goes on sale once
absorbs have drawn the reserve under target.
Deterministic: re-running produces identical files.
"""
import json
import math
import pathlib
import random

SECONDS_PER_YEAR = 31_536_000
STEPS_PER_DAY = 1728

ASSETS = [
    # symbol, decimals, price, bcf, lcf, lf, daily vol
    ("WETH", 18, "2400", "0.825", "0.895", "0.95", 0.045),
    ("WBTC", 8, "60000", "0.7", "0.77", "0.95", 0.035),
    ("ARB", 18, "1.1", "0.55", "0.6", "0.93", 0.065),
    ("GMX", 18, "30", "0.4", "0.45", "0.9", 0.06),
]
CORR = [
    [1.0, 0.8, 0.65, 0.55],
    [0.8, 1.0, 0.55, 0.5],
    [0.65, 0.55, 1.0, 0.5],
    [0.55, 0.5, 0.5, 1.0],
]


def per_second(annual):
    return f"{annual / SECONDS_PER_YEAR:.18f}"


def garch(daily_vol, alpha=0.05, beta=0.9):
    step_var = daily_vol ** 2 / STEPS_PER_DAY
    return {"mu": 0.0, "ar": [], "ma": [], "alpha0": step_var * (1 - alpha - beta), "alpha": [alpha], "beta": [beta]}


def config():
    return {
        "schema_version": 1,
        "market": {
            "base_asset": {"symbol": "USDC", "decimals": 6},
            "storefront_price_factor": "0.6",
            "target_reserve": "5000000",
            "supply_rate": {"base": per_second(0.0), "slope_low": per_second(0.03), "slope_high": per_second(2.5),
                            "kink": "0.9"},
            "borrow_rate": {"base": per_second(0.015), "slope_low": per_second(0.035), "slope_high": per_second(3.0),
                            "kink": "0.9"},
            "collaterals": [
                {"symbol": s, "decimals": d, "borrow_collateral_factor": b, "liquidation_collateral_factor": l,
                 "liquidation_factor": f, "supply_cap": "1000000000"}
                for s, d, _, b, l, f, _ in ASSETS
            ],
        },
        "price_model": {"garch": {a[0]: garch(a[6]) for a in ASSETS}, "correlation": CORR},
        "slippage": {"unit": "percent"},
        "liquidator": {"trading_fee": "0.003", "max_lot_usd": "250000", "min_lot_usd": "100",
                       "fee_in_threshold": True},
        "borrower_filter": {"min_borrow_usd": "1000", "max_health_factor": "2"},
        "scenario": {"horizon_steps": STEPS_PER_DAY, "step_seconds": 50, "paths_per_round": 5000, "rounds": 3,
                     "max_rounds": 10, "epsilon": "1%", "seed": 20240917, "lar_bins": 100},
    }


def snapshot(rng):
    accounts = []
    total_debt = 0
    for i in range(240):
        debt = round(math.exp(rng.uniform(math.log(2_000), math.log(1_500_000))), 2)
        health = 1.06 + 0.9 * rng.random() ** 1.5
        held = rng.sample(range(len(ASSETS)), k=rng.choice([1, 1, 2, 2, 3]))
        weights = [rng.random() + 0.2 for _ in held]
        collateral = {}
        for idx, w in zip(held, weights):
            sym, dec, price, _, lcf, _, _ = ASSETS[idx]
            value = health * debt * w / sum(weights) / float(lcf)
            qty = math.ceil(value / float(price) * 1e6) / 1e6
            collateral[sym] = f"{qty:.6f}"
        accounts.append({"id": f"acct-{i:03d}", "collateral": collateral, "base_borrowed": f"{debt:.2f}",
                         "base_supplied": "0"})
        total_debt += debt
    # Utilization around 80%.
    supply = total_debt / 0.8
    shares = [rng.random() + 0.1 for _ in range(30)]
    suppliers = [{"id": f"supplier-{j:02d}", "amount": f"{supply * s / sum(shares):.2f}"}
                 for j, s in enumerate(shares)]
    return {
        "schema_version": 1,
        "block_height": 150_000_000,
        "prices": {a[0]: a[2] for a in ASSETS} | {"USDC": "1"},
        "base_reserve": "6000000",
        "accounts": accounts,
        "suppliers": suppliers,
    }


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data"
    out.mkdir(exist_ok=True)
    (out / "demo_config.json").write_text(json.dumps(config(), indent=2) + "\n")
    (out / "demo_snapshot.json").write_text(json.dumps(snapshot(random.Random(7)), indent=2) + "\n")


if __name__ == "__main__":
    main()
