"""Regenerates the synthetic fixtures under fixtures/ (deterministic)."""
import json, os, random

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")

# (id, question, steps, final_answer, gold, solution_correct, rel[3][n], coh[3][n], corr[1][n])
S = []
def add(i, q, steps, fa, gold, sc, rel, coh, corr):
    n = len(steps)
    for a in rel + coh + corr:
        assert len(a) == n, (i, a)
    S.append(dict(id=i, question=q, steps=steps, final_answer=fa, gold_answer=gold,
                  solution_correct=sc,
                  annotations=dict(relevance=rel, coherence=coh, correctness=corr)))

ones = lambda n: [1]*n
# valid solutions
add("s01", "Tom has 3 boxes with 4 apples in each box. He eats 2 apples. How many apples are left?",
    ["Each box holds 4 apples and there are 3 boxes.", "So Tom starts with 3 * 4 = 12 apples.",
     "He eats 2, leaving 12 - 2 = 10 apples."], "#### 10", "10", 1,
    [ones(3), ones(3), [1,0,1]], [ones(3), ones(3), ones(3)], [ones(3)])
add("s02", "A shirt costs $20 and is discounted by 25%. What is the sale price in dollars?",
    ["The discount is 25% of $20.", "25% of 20 is 0.25 * 20 = 5 dollars.",
     "The sale price is 20 - 5 = 15 dollars.", "So the shirt costs $15."], "#### $15", "15", 1,
    [ones(4), ones(4), ones(4)], [ones(4), [1,1,0,1], ones(4)], [ones(4)])
# invalid, relevant and coherent, answer correct (4)
add("s03", "A train travels 60 miles per hour for 3 hours. How far does it travel?",
    ["Distance equals speed times time.", "The speed is 60 miles per hour.",
     "60 * 3 = 170 miles.", "Correcting the total, the train travels 180 miles."], "#### 180", "180", 0,
    [ones(4), ones(4), [1,1,1,0]], [ones(4), ones(4), ones(4)], [[1,1,0,1]])
add("s04", "Sara reads 12 pages a day. How many pages does she read in a week?",
    ["A week has 7 days.", "She reads 12 * 7 pages.", "12 * 7 = 74.", "Rechecking, 12 * 7 = 84 pages."],
    "#### 84.0", "84", 0,
    [ones(4), ones(4), ones(4)], [ones(4), [1,0,1,1], ones(4)], [[1,1,0,1]])
add("s05", "A baker makes 250 cookies a day for 4 days. How many cookies is that?",
    ["The baker bakes for 4 days.", "Each day gives 250 cookies.", "250 * 4 = 900 cookies.",
     "Adding the four days again: 250 + 250 + 250 + 250 = 1,000.", "The total is 1,000 cookies."],
    "#### 1,000", "1000", 0,
    [ones(5), ones(5), ones(5)], [ones(5), ones(5), [1,1,1,0,1]], [[1,1,0,1,1]])
add("s06", "Half of a pizza is split equally between 2 friends. What fraction of the pizza does each get?",
    ["Half of the pizza is 1/2.", "Splitting it between 2 friends divides by 2.",
     "1/2 divided by 2 is 1.", "Each friend therefore gets 2/4 of the half, which is 1/4 of the pizza."],
    "#### 1/4", "0.25", 0,
    [ones(4), [1,1,0,1], ones(4)], [ones(4), ones(4), ones(4)], [[1,1,0,1]])
# invalid, relevant and coherent, answer wrong (2)
add("s07", "Lily has 5 red and 7 blue marbles. She gives away 3. How many marbles remain?",
    ["Lily has 5 + 7 marbles in total.", "5 + 7 = 13.", "After giving away 3, 13 - 3 = 10 remain."],
    "#### 10", "9", 0,
    [ones(3), ones(3), ones(3)], [ones(3), ones(3), [0,1,1]], [[1,0,1]])
add("s08", "A garden is 8 meters long and 5 meters wide. What is its area?",
    ["Area of a rectangle is length times width.", "8 * 5 = 45.", "The area is 45 square meters."],
    "#### 45", "40", 0,
    [ones(3), ones(3), ones(3)], [ones(3), ones(3), ones(3)], [[1,0,1]])
# invalid, not relevant/coherent, answer correct (1)
add("s09", "Ben saves $6 a week. How much does he save in 5 weeks?",
    ["Ben likes to save money for a bike.", "Bikes usually cost about $100.",
     "He saves 6 * 5 = 30 dollars.", "So he saves $30."], "#### 30", "30", 0,
    [[0,0,1,1], [1,0,1,1], [0,0,1,1]], [ones(4), ones(4), ones(4)], [[1,0,1,1]])
# invalid, not relevant/coherent, answer wrong (3)
add("s10", "There are 24 students split into 4 equal teams. How many students are on each team?",
    ["24 students are split into 4 teams.", "Therefore each team has 8 students.",
     "24 / 4 = 6 is the team size.", "Each team has 8 students."], "#### 8", "6", 0,
    [ones(4), ones(4), ones(4)], [[1,0,1,0], [1,0,1,0], [1,1,1,0]], [[1,0,1,0]])
add("s11", "A car uses 5 liters of fuel per 100 km. How much fuel for 300 km?",
    ["Fuel use is 5 liters per 100 km.", "The car is red and has four doors.",
     "300 km is 3 times 100 km.", "So it needs 5 + 3 = 8 liters."], "#### 8", "15", 0,
    [[1,0,1,1], [1,0,1,1], [1,1,1,1]], [[1,0,1,0], [1,1,1,0], [1,1,1,1]], [[1,1,1,0]])
add("s12", "Mia buys 3 pens at $2 each and a notebook at $4. How much does she spend?",
    ["The pens cost 3 * 2 = 6 dollars.", "Adding the notebook gives 6 + 4 = 10 dollars.",
     "Notebooks are useful for school.", "Taking away the pens, she spends $4."], "#### 4", "10", 0,
    [[1,1,0,1], [1,1,0,1], ones(4)], [ones(4), [1,1,1,0], [1,1,1,0]], [[1,1,1,0]])

hdr = {"benchmark": "mra_mini", "style": "gsm8k"}
with open(os.path.join(OUT, "mra_mini.jsonl"), "w") as f:
    f.write(json.dumps(hdr) + "\n")
    for s in S:
        f.write(json.dumps(s) + "\n")

def maj(cols):
    return [1 if 2*sum(c) > len(c) else 0 for c in zip(*cols)]

rng = random.Random(20261019)
rows = []
for s in S:
    n = len(s["steps"])
    for asp in ("relevance", "coherence", "correctness"):
        gold = maj(s["annotations"][asp])
        # CaSE labels: gold with an occasional flip
        labels = [g if rng.random() > 0.12 else 1 - g for g in gold]
        # BoN: 8 whole-trace votes, noisier, biased towards "YES"
        # Whole-trace votes lean towards YES on some flawed steps.
        lean = [rng.random() < 0.6 for _ in gold]
        votes = []
        for _ in range(8):
            v = []
            for g, l in zip(gold, lean):
                if g == 0 and l:
                    v.append(1 if rng.random() < 0.7 else 0)
                else:
                    v.append(g if rng.random() > 0.2 else 1 - g)
            votes.append(v)
        rows.append({"sample_id": s["id"], "aspect": asp, "labels": labels, "votes": votes})
with open(os.path.join(OUT, "verdicts.jsonl"), "w") as f:
    for r in rows:
        f.write(json.dumps(r) + "\n")

# SFT corpus built from the same traces, so the verdict table covers it.
with open(os.path.join(OUT, "sft_mini.jsonl"), "w") as f:
    for s in S:
        f.write(json.dumps({"question": s["question"], "steps": s["steps"],
                            "answer": s["final_answer"], "meta": {"source_id": s["id"]}}) + "\n")

problems = [
    ("p1", "Find the remainder when $2^{10}$ is divided by $7$.", "2"),
    ("p2", "What is $\\frac{1}{2} + \\frac{1}{3}$?", "\\frac{5}{6}"),
    ("p3", "How many positive divisors does $36$ have?", "9"),
    ("p4", "Compute $0.75 \\times 8$.", "6"),
]
with open(os.path.join(OUT, "problems.jsonl"), "w") as f:
    for pid, q, a in problems:
        f.write(json.dumps({"id": pid, "question": q, "answer": a}) + "\n")

# Scripted generations: (problem, mode or None, seed or None, boxed answer)
gens = [
    ("p1", None, None, "2"), ("p1", None, 1, "4"),
    ("p2", None, None, "\\dfrac{5}{6}"), ("p2", "baseline", 2, "\\frac{2}{5}"),
    ("p3", None, None, "9"), ("p3", "baseline", None, "8"), ("p3", "correctness-only", 0, "8"),
    ("p4", None, None, "6.0"), ("p4", "multi-aspect", 2, "7"),
]
with open(os.path.join(OUT, "generations.jsonl"), "w") as f:
    for pid, mode, seed, ans in gens:
        rec = {"problem_id": pid, "response": "Working through the problem step by step.\nThe answer is $\\boxed{%s}$." % ans}
        if mode: rec["mode"] = mode
        if seed is not None: rec["seed"] = seed
        f.write(json.dumps(rec) + "\n")

# Hand check of the answer-correctness split among invalid solutions.
inc = [s for s in S if s["solution_correct"] == 0]
def rc(s):
    return min(maj(s["annotations"]["relevance"])) == 1 and min(maj(s["annotations"]["coherence"])) == 1
from fractions import Fraction
def norm(x): return Fraction(x.replace("#### ","").replace("$","").replace(",",""))
sat = [s for s in inc if rc(s)]; vio = [s for s in inc if not rc(s)]
print(len(sat), sum(norm(s["final_answer"]) == norm(s["gold_answer"]) for s in sat))
print(len(vio), sum(norm(s["final_answer"]) == norm(s["gold_answer"]) for s in vio))
print(sum(len(s["steps"]) for s in S))
