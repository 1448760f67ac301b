"""Regenerate the bundled CSVs under src/cfcase/datasets from a keel_ds wheel.

    pip download --no-deps keel-ds
    python scripts/make_datasets.py keel_ds-0.2.5-py3-none-any.whl

The KEEL copies are the UCI files with rows holding missing values removed.
Glass only ships as one-vs-rest binarisations; the 6-class label is rebuilt
from the files that share row order (glass2 is shuffled, its class is the
remainder).
"""
import csv
import sys
import zipfile
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "cfcase" / "datasets"

NAMES = {
    "iris": ["sepal_length", "sepal_width", "petal_length", "petal_width", "class"],
    "wine": ["alcohol", "malic_acid", "ash", "alcalinity_of_ash", "magnesium",
             "total_phenols", "flavanoids", "nonflavanoid_phenols", "proanthocyanins",
             "color_intensity", "hue", "od280_od315", "proline", "class"],
    "bupa": ["mcv", "alkphos", "sgpt", "sgot", "gammagt", "drinks", "selector"],
    "sonar": [f"band_{i:02d}" for i in range(1, 61)] + ["class"],
    "housevotes": ["handicapped_infants", "water_project_cost_sharing",
                   "adoption_of_the_budget_resolution", "physician_fee_freeze",
                   "el_salvador_aid", "religious_groups_in_schools",
                   "anti_satellite_test_ban", "aid_to_nicaraguan_contras", "mx_missile",
                   "immigration", "synfuels_corporation_cutback", "education_spending",
                   "superfund_right_to_sue", "crime", "duty_free_exports",
                   "export_administration_act_south_africa", "party"],
    "wisconsin": ["clump_thickness", "cell_size_uniformity", "cell_shape_uniformity",
                  "marginal_adhesion", "single_epithelial_cell_size", "bare_nuclei",
                  "bland_chromatin", "normal_nucleoli", "mitoses", "class"],
}
RENAME = {"housevotes": "votes"}
GLASS = ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe", "type"]
GLASS_PARTS = {"glass0": "1", "glass1": "2", "glass4": "5", "glass5": "6", "glass6": "7"}


def rows(z, member):
    text = z.read(member).decode()
    out = []
    for line in text.splitlines():
        if line.strip() and not line.lstrip().startswith("@"):
            out.append([v.strip() for v in line.split(",")])
    return out


def write(name, header, data):
    with open(OUT / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(data)
    print(name, len(data))


def main(wheel):
    z = zipfile.ZipFile(wheel)
    for key, header in NAMES.items():
        data = rows(z, f"keel_ds/data/balanced/raw/{key}.dat")
        assert all(len(r) == len(header) for r in data), key
        write(RENAME.get(key, key), header, data)

    base = rows(z, "keel_ds/data/imbalanced/raw/glass0.dat")
    labels = ["3"] * len(base)
    for part, cls in GLASS_PARTS.items():
        other = rows(z, f"keel_ds/data/imbalanced/raw/{part}.dat")
        assert [r[:-1] for r in other] == [r[:-1] for r in base], part
        for i, r in enumerate(other):
            if r[-1] == "positive":
                labels[i] = cls
    write("glass", GLASS, [r[:-1] + [c] for r, c in zip(base, labels)])


if __name__ == "__main__":
    main(sys.argv[1])
