import csv
import filecmp

import pytest

from dkws.cli import CSV_COLUMNS, main
from dkws.graph import load_graph_files
from dkws.sketch import Sketches, read_sketches


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _strip_time(rows):
    return [{k: v for k, v in r.items() if k != "elapsed_ms"} for r in rows]


@pytest.fixture
def tiny(tmp_path):
    edges = tmp_path / "t.edges"
    labels = tmp_path / "t.labels"
    edges.write_text("0 1 1\n1 2 2\n2 0 1\n")
    labels.write_text("0 a\n2 b\n")
    return str(edges), str(labels)


@pytest.fixture
def er_files(tmp_path):
    e, l = tmp_path / "g.edges", tmp_path / "g.labels"
    assert main(["generate", "--kind", "er", "--n", "300", "--graph-seed", "2",
                 "--edges", str(e), "--labels", str(l)]) == 0
    return str(e), str(l)


def test_index_roundtrip_and_determinism(tiny, tmp_path, capsys):
    e, l = tiny
    out1, out2 = tmp_path / "a.idx", tmp_path / "b.idx"
    assert main(["index", "--edges", e, "--labels", l, "--k-param", "1", "--out", str(out1)]) == 0
    assert main(["index", "--edges", e, "--labels", l, "--k-param", "1", "--out", str(out2)]) == 0
    assert filecmp.cmp(out1, out2, shallow=False)
    g = load_graph_files(e, l)
    loaded = read_sketches(out1, g)
    built = Sketches.build(g, 1)
    assert loaded.pads.out_sketch == built.pads.out_sketch
    assert loaded.pads.in_sketch == built.pads.in_sketch
    assert loaded.kpads.in_sketch == built.kpads.in_sketch


def test_index_size_report_on_1000_vertices(tmp_path, capsys):
    e, l = tmp_path / "g.edges", tmp_path / "g.labels"
    main(["generate", "--n", "1000", "--edges", str(e), "--labels", str(l)])
    capsys.readouterr()
    assert main(["index", "--edges", str(e), "--labels", str(l), "--out", str(tmp_path / "s.idx")]) == 0
    out = capsys.readouterr().out
    size = float(out.rsplit("mean sketch size", 1)[1])
    with capsys.disabled():
        print(f"\n  mean PADS size at |V|=1000, k=4: {size:.2f}")
    assert size > 0


def test_three_fragment_query_with_np(three_fragment_paths, tmp_path, capsys):
    csv_path = tmp_path / "q.csv"
    rc = main(["query", "--edges", three_fragment_paths["edges"], "--labels", three_fragment_paths["labels"],
               "--vertices", "32", "--partition", three_fragment_paths["part"], "--workers", "3",
               "--variant", "np", "--keywords", "a,b", "--tau", "3", "--k", "2", "--csv", str(csv_path)])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split("\t")[:2] for ln in lines] == [["4", "2"], ["17", "3"]]
    assert lines[0].split("\t")[2] == "a=20:1 b=21:1"
    rows = _rows(csv_path)
    assert list(rows[0]) == CSV_COLUMNS
    assert rows[0]["results"] == "4:2;17:3" and rows[0]["workers"] == "3"


def test_absent_keyword_prints_nothing(tiny, capsys):
    e, l = tiny
    assert main(["query", "--edges", e, "--labels", l, "--workers", "2", "--keywords", "a,zzz"]) == 0
    assert capsys.readouterr().out.strip() == "no matches"


def test_deterministic_query_rows_repeat(er_files, tmp_path):
    e, l = er_files
    path = tmp_path / "d.csv"
    args = ["query", "--edges", e, "--labels", l, "--workers", "4", "--keywords", "k0,k1,k3",
            "--deterministic", "--seed", "5", "--variant", "np", "--csv", str(path)]
    assert main(args) == 0
    assert main(args) == 0
    a, b = _strip_time(_rows(path))
    assert a == b


def test_bench_row_count_on_1000_vertices(tmp_path, capsys):
    out = tmp_path / "b.csv"
    rc = main(["bench", "--generate", "er:1000", "--variants", "baseline,pine", "--sizes", "2,4",
               "--out", str(out)])
    assert rc == 0
    rows = _rows(out)
    assert len(rows) == 200
    assert {r["variant"] for r in rows} == {"baseline", "pine"}
    assert {r["num_keywords"] for r in rows} == {"2", "4"}
    by_q = {}
    for r in rows:
        by_q.setdefault(r["query_id"], set()).add(
            tuple(sorted(float(x.split(":")[1]) for x in r["results"].split(";") if x)))
    assert all(len(v) == 1 for v in by_q.values())


def test_bench_check_oracle(er_files, capsys):
    e, l = er_files
    rc = main(["bench", "--edges", e, "--labels", l, "--sizes", "3", "--queries", "3",
               "--workers", "4", "--check-oracle"])
    assert rc == 0
    assert "oracle mismatches: 0" in capsys.readouterr().out


def test_bench_errors(er_files, capsys):
    e, l = er_files
    assert main(["bench", "--edges", e, "--labels", l, "--variants", "nope"]) == 2
    assert main(["bench", "--edges", e, "--labels", l, "--sizes", "25", "--queries", "1"]) == 2
    assert main(["bench"]) == 2


def test_oracle_and_partition_commands(three_fragment_paths, tmp_path, capsys):
    assert main(["oracle", "--edges", three_fragment_paths["edges"], "--labels", three_fragment_paths["labels"],
                 "--vertices", "32", "--keywords", "a,b", "--k", "2"]) == 0
    assert capsys.readouterr().out.split() == ["4", "2", "17", "3"]
    part = tmp_path / "p.part"
    assert main(["partition", "--edges", three_fragment_paths["edges"], "--vertices", "32", "--workers", "3",
                 "--out", str(part)]) == 0
    assert len(part.read_text().split()) == 32


def test_missing_and_malformed_inputs(tmp_path, capsys):
    assert main(["query", "--edges", str(tmp_path / "missing"), "--keywords", "a"]) == 1
    bad = tmp_path / "bad.edges"
    bad.write_text("0 0 1\n")
    assert main(["oracle", "--edges", str(bad), "--keywords", "a"]) == 1
    assert "self-loop" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["query", "--edges", str(bad), "--keywords", "a", "--variant", "fastest"])
