#!/usr/bin/env python3
"""Regenerates the scripted traces under fixtures/traces/.

    python3 scripts/make_traces.py [--intent FILE]

Output is deterministic. With --intent, also writes the category each
generated alternative was designed to receive, keyed by trace and step.
"""

import argparse
import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures" / "traces"


def lp(p):
    return round(math.log(p), 6)


def step(*cands):
    """cands: (text, prob) pairs, most likely first."""
    return {"candidates": [{"text": t, "logprob": lp(p)} for t, p in cands]}


def dump(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------- login ----

LOGIN_PREFIX = (
    "import hashlib\n"
    "import os\n"
    "\n"
    "\n"
    "def register(username, password, db):\n"
    "    # store the new user with a hashed password\n"
    "    hashed = hashlib."
)
LOGIN_SUFFIX = (
    "\n"
    "\n"
    "def login(username, password, db):\n"
    "    record = db.load(username)\n"
    "    return record is not None\n"
)

SCRYPT_SAMPLE = (
    "(password.encode(), salt=os.urandom(16), n=2**14, r=8, p=1).hex()\n"
    "    db.save(username, hashed)"
)

SCRYPT_SAMPLES = [
    "(password, salt=b'', n=16384, r=8, p=1)\n    db.insert(username, hashed)\n    return hashed\n",
    "(password.encode('utf-8'), salt=os.urandom(32), n=2**15, r=8, p=2, dklen=64).hex()\n"
    "    db.save(username, hashed, salt)\n"
    "    return hashed\n",
    "(\n        password.encode(),\n        salt=os.urandom(16),\n        n=2**14,\n"
    "        r=8,\n        p=1,\n    ).hex()\n    db.save(username, hashed)\n",
    SCRYPT_SAMPLE,
    "(password.encode(), salt=username.encode(), n=1024, r=8, p=1)\n"
    "    db.store(username, hashed)\n    return True\n",
    "(bytes(password, 'utf-8'), salt=os.urandom(16), n=2**14, r=8, p=1).hex()\n",
    "(password.encode(), salt=SALT, n=2**14, r=8, p=1)\n    db.save(username, hashed.hex())\n    return hashed\n",
    "(password.encode(), salt=os.urandom(16), n=2**14, r=8, p=1, dklen=32).hex()\n"
    "    db.save(username, hashed)\n    db.commit()\n",
    "(password.encode(), salt=os.urandom(16), n=2**14, r=8, p=1, maxmem=0).hex()\n",
    "(\n        password.encode(), salt=os.urandom(16), n=2**14, r=8, p=1\n    )\n",
]


def scrypt_branch():
    # Token steps reproducing SCRYPT_SAMPLE exactly.
    steps = [
        step(("(", 0.98)),
        step(("password", 0.95), ("pwd", 0.02)),
        step((".encode", 0.9), (".strip", 0.03)),
        step(("(", 0.99)),
        # the encode step: default vs explicit codec
        step((")", 0.6), ('"utf-8"', 0.35)),
        step((",", 0.97)),
        step((" salt", 0.85), ("\n        salt", 0.1)),
        step(("=", 0.99)),
        step(("os", 0.8), ("b", 0.1), ("username", 0.05)),
        step((".urandom", 0.97)),
        step(("(", 0.99)),
        # the salt length
        step(("16", 0.8), ("32", 0.15)),
        step((")", 0.97), ("))", 0.01)),
        step((",", 0.98)),
        step((" n", 0.95)),
        step(("=", 0.99)),
        step(("2", 0.7), ("16384", 0.2)),
        step(("**", 0.99)),
        step(("14", 0.75), ("15", 0.12), ("16", 0.08)),
        step((",", 0.99)),
        step((" r", 0.99)),
        step(("=", 0.99)),
        step(("8", 0.97)),
        step((",", 0.99)),
        step((" p", 0.99)),
        step(("=", 0.99)),
        step(("1", 0.95)),
        step((")", 0.9), (", dklen", 0.06)),
        step((".hex", 0.8), (".hexdigest", 0.05)),
        step(("()", 0.99)),
        step(("\n", 0.99)),
        step(("    db", 0.97)),
        step((".save", 0.9), (".store", 0.05)),
        step(("(", 0.99)),
        step(("username", 0.98)),
        step((",", 0.99)),
        step((" hashed", 0.95), (" salt", 0.03)),
        step((")", 0.95), (", salt", 0.04)),
    ]
    text = "".join(s["candidates"][0]["text"] for s in steps)
    assert text == SCRYPT_SAMPLE, (text, SCRYPT_SAMPLE)
    return {
        "steps": steps,
        "previews": {
            '4:1': '"utf-8"),',
            '11:1': "32), n=2**14, r=8, p=1).hex()",
        },
    }


def login_trace():
    steps = [
        # the hash function choice
        step(("sha256", 0.55), ("md5", 0.15), ("pbkdf2_hmac", 0.12), ("scrypt", 0.08), ("blake2b", 0.05)),
        step(("(", 0.99)),
        step(("password", 0.93), ("pwd", 0.03)),
        step((".encode", 0.96)),
        step(("(", 0.99)),
        step((")", 0.99), ('"utf-8"', 0.005)),
        step((")", 0.98), ("))", 0.01)),
        step((".hexdigest", 0.9), (".digest", 0.08)),
        step(("()", 0.99)),
        step(("\n", 0.99)),
        step(("    db", 0.97)),
        step((".save", 0.92), (".store", 0.04)),
        step(("(", 0.99)),
        step(("username", 0.98), ("user", 0.01)),
        step((",", 0.99)),
        step((" hashed", 0.97)),
        step((")", 0.99)),
    ]
    base = "".join(s["candidates"][0]["text"] for s in steps)
    assert base == "sha256(password.encode()).hexdigest()\n    db.save(username, hashed)"
    idx = SCRYPT_SAMPLES.index(SCRYPT_SAMPLE)
    return {
        "context": {"prefix": LOGIN_PREFIX, "suffix": LOGIN_SUFFIX, "languageHint": "python"},
        "steps": steps,
        "previews": {
            "0:1": "md5(password.encode()).hexdigest()",
            "0:2": "pbkdf2_hmac('sha256', password.encode(), os.urandom(16), 100000).hex()",
            "0:3": "scrypt(password.encode(),",
            "0:4": "blake2b(password.encode()).hexdigest()",
        },
        "suffixes": {"0:3": SCRYPT_SAMPLES},
        "continuations": {f"0:3:{idx}": scrypt_branch()},
        # whole completions sampled without token data, for baseline runs
        "globals": [
            base,
            "md5(password.encode()).hexdigest()\n    db.save(username, hashed)",
            "sha256(password.encode('utf-8')).hexdigest()\n    db.save(username, hashed)",
            "scrypt" + SCRYPT_SAMPLE,
            "pbkdf2_hmac('sha256', password.encode(), salt, 100000).hex()\n    db.save(username, hashed, salt)",
        ],
    }


# ----------------------------------------------------------- regeneration ----

REGEN_LINES = [
    "total = sum(values)\n",
    "count = len(values)\n",
    "mean = total / count\n",
    "return round(mean, 2)\n",
]


def regen_trace():
    toks = [
        [("total", 0.9)], [(" =", 0.99)],
        [(" sum", 0.7), (" max", 0.2), (" min", 0.05)],
        [("(", 0.99)], [("values", 0.95)], [(")", 0.99)], [("\n", 0.99)],
        [("count", 0.9)], [(" =", 0.99)], [(" len", 0.97)], [("(", 0.99)], [("values", 0.97)],
        [(")", 0.99)], [("\n", 0.99)],
        [("mean", 0.8), ("avg", 0.15)], [(" =", 0.99)], [(" total", 0.95)],
        [(" /", 0.9), (" //", 0.08)], [(" count", 0.98)], [("\n", 0.99)],
        [("return", 0.95)], [(" round", 0.8), (" float", 0.1)], [("(", 0.99)], [("mean", 0.97)],
        [(",", 0.99)], [(" 2", 0.7), (" 3", 0.2)], [(")", 0.99)], [("\n", 0.99)],
    ]
    steps = [step(*t) for t in toks]
    text = "".join(t[0][0] for t in toks)
    assert text == "".join(REGEN_LINES)
    # post-step text after " sum" (step 2) and after " /" (step 17)
    after_sum = text[len("total = sum"):]
    after_div = text[len("total = sum(values)\ncount = len(values)\nmean = total /"):]
    sum_samples = [
        "(values) or 0\ncount = len(values)\n",
        "(values)\nn = len(values)\nmean = total / n\nreturn mean\n",
        "(v for v in values)\ncount = len(values)\nmean = total / count\nreturn round(mean, 2)\n",
        "(values, default=0)\n",
        "(values)\ncount = len(values)\nmean = total / count\nreturn mean\n",
        "(values)\nreturn total\n",
        after_sum,
        "(values)\ncount = len(values)\nmean = total / count\nreturn round(mean, 3)\n",
        after_sum,
        "(values)\n",
    ]
    div_samples = [
        " count\nreturn mean\n",
        " count\nreturn int(mean)\n",
        " max(count, 1)\nreturn round(mean, 2)\n",
        " count\nreturn round(mean)\n",
        " count if count else 0\n",
        " count\nreturn round(mean, 1)\n",
        " count\nreturn round(mean, 1)\n",
        " (count or 1)\nreturn mean\n",
        " count\n",
        " count\nreturn round(mean, 0)\n",
    ]
    assert after_div == " count\nreturn round(mean, 2)\n"
    return {
        "steps": steps,
        "suffixes": {"2:1": sum_samples, "17:1": div_samples},
    }


# ------------------------------------------------------ highlight budget ----

# Token classes: ident (rename alts), callee, lit (literal inside a call),
# lit0 (literal outside brackets), kw (control-flow keyword), op, close,
# open, plain (no alternatives).
LINES = [
    [("    total", "ident"), (" =", "op"), (" sum", "callee"), ("(", "open"), ("values", "ident"), (")", "close"), ("\n", "plain")],
    [("    count", "ident"), (" =", "op"), (" len", "callee"), ("(", "open"), ("items", "ident"), (")", "close"), ("\n", "plain")],
    [("    if", "kw"), (" count", "ident"), (" >", "op"), (" 10", "lit0"), (":", "plain"), ("\n", "plain")],
    [("    result", "ident"), (" =", "op"), (" round", "callee"), ("(", "open"), ("total", "ident"), (" /", "op"), (" count", "ident"), (",", "plain"), (" 2", "lit"), (")", "close"), ("\n", "plain")],
    [("    return", "kw"), (" result", "ident"), ("\n", "plain")],
    [("    items", "ident"), (" =", "op"), (" sorted", "callee"), ("(", "open"), ("items", "ident"), (",", "plain"), (" reverse", "ident"), ("=", "plain"), ("True", "lit"), (")", "close"), ("\n", "plain")],
    [("    log", "ident"), (".", "plain"), ("info", "callee"), ("(", "open"), ('"done"', "lit"), (")", "close"), ("\n", "plain")],
    [("    for", "kw"), (" item", "ident"), (" in", "plain"), (" items", "ident"), (":", "plain"), ("\n", "plain")],
    [("        seen", "ident"), (".", "plain"), ("add", "callee"), ("(", "open"), ("item", "ident"), (")", "close"), ("\n", "plain")],
]

RENAMES = {
    "total": ["acc", "sum_", "s"], "values": ["vals", "xs", "data"], "count": ["n", "num", "size"],
    "items": ["elems", "rows", "xs"], "result": ["res", "out", "value"], "reverse": ["desc"],
    "log": ["logger", "LOG"], "item": ["x", "elem", "row"], "seen": ["visited", "done"],
}
SIG = {
    "callee": {"sum": ["max", "min"], "len": ["sum", "max"], "round": ["int", "float"],
               "sorted": ["reversed", "list"], "info": ["debug", "warning"], "add": ["discard", "remove"]},
    "lit": {"2": ["3", "1"], "True": ["False"], '"done"': ['"start"', '"failed"']},
    "kw": {"if": ["while"], "return": ["yield"], "for": ["while"]},
}


def lead(text):
    stripped = text.lstrip(" \n")
    return text[: len(text) - len(stripped)], stripped


def split_probs(rng, n_alts, p0, heavy_first):
    rest = (1.0 - p0) * rng.uniform(0.7, 0.95)
    if n_alts == 1:
        shares = [1.0]
    else:
        raw = [rng.uniform(0.2, 1.0) for _ in range(n_alts)]
        if heavy_first:
            raw[0] += 1.5
        total = sum(raw)
        shares = sorted((r / total for r in raw), reverse=True)
    probs = [max(round(rest * s, 4), 0.001) for s in shares]
    return [min(p, round(p0 - 0.001, 4)) for p in probs]


def budget_trace(seed):
    rng = random.Random(seed)
    toks = []
    while len(toks) < 40:
        toks.extend(rng.choice(LINES))
    toks = toks[:40]
    eligible = [i for i, (_, k) in enumerate(toks) if k in SIG]
    n_sig = rng.randint(1, 3)
    sig_steps = set(rng.sample(eligible, min(n_sig, len(eligible))))
    steps, intent = [], {}
    for i, (text, kind) in enumerate(toks):
        ws, core = lead(text)
        alts, cats = [], []
        if i in sig_steps:
            table = SIG[kind]
            alts = [ws + a for a in table[core]]
            cats = [("Significant", 0.9 if kind == "kw" else 0.8)] * len(alts)
        elif kind == "ident" and rng.random() < 0.7:
            names = [n for n in RENAMES[core]]
            rng.shuffle(names)
            alts = [ws + n for n in names[: rng.randint(1, 3)]]
            cats = [("Minor", 0.1)] * len(alts)
        elif kind == "op" and rng.random() < 0.5:
            alts = [ws + " " + core]
            cats = [("Minor", 0.2)]
        elif kind == "lit0" and rng.random() < 0.6:
            alts = [ws + "5"]
            cats = [("Minor", 0.2)]
        elif kind == "close" and rng.random() < 0.5:
            alts = ["))"]
            cats = [("Incorrect", 0.0)]
        if not alts:
            steps.append(step((text, round(rng.uniform(0.9, 0.995), 4))))
            continue
        if i in sig_steps:
            p0 = round(rng.uniform(0.45, 0.8), 4)
        else:
            p0 = round(rng.uniform(0.35, 0.95), 4)
        probs = split_probs(rng, len(alts), p0, i in sig_steps)
        pairs = sorted(zip(alts, probs, cats), key=lambda x: -x[1])
        steps.append(step((text, p0), *[(a, p) for a, p, _ in pairs]))
        intent[str(i)] = [c for _, _, c in pairs]
    prefix = f"# budget trace {seed}\ndef summarize_{seed}(values, items, log, seen):\n"
    trace = {
        "context": {"prefix": prefix, "suffix": "", "languageHint": "python"},
        "finishReason": "length",
        "steps": steps,
    }
    return trace, intent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--intent", type=Path)
    args = ap.parse_args()
    dump(OUT / "login.json", login_trace())
    dump(OUT / "regen.json", regen_trace())
    intents = {}
    for seed in range(1, 9):
        trace, intent = budget_trace(seed)
        name = f"budget_{seed:02}"
        dump(OUT / "budget" / f"{name}.json", trace)
        intents[name] = intent
    if args.intent:
        dump(args.intent, intents)


if __name__ == "__main__":
    main()
