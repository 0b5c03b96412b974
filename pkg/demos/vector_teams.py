"""Vector teams: gather sigma_vec[i] tokens of every color i.

Colors run in separate TF instances.  Their teams become super-tokens that
two-color instances pair up, level by level, until one super-token stands
for a complete vector team.
"""

from teamform import RunConfig, run

vec = [2, 3, 2, 4]
script = []
t = 0.0
for color, size in enumerate(vec):
    for k in range(2 * size):
        script.append({"time": t, "node": (7 * color + 5 * k) % 32, "count": 1, "color": color})
        t += 0.25

cfg = RunConfig(experiment="vtf", n=32, sigma_vec=vec, injections=script)
res = run(cfg, seed=1)
app = res.outcome
print(f"vector teams: {len(app.teams)}")
for (lvl, color), k in sorted(app.emitted.items()):
    print(f"  level {lvl} color {color}: {k} super-token(s)")
for name, rep in res.reports.items():
    print(f"  {name}: {rep.summary()}")
