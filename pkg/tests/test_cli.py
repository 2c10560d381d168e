import io
import sys

import pytest

from netslice.cli import main, run_scenario

from conftest import FIXTURES


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_clean_request(capsys):
    code, out, _ = _run(capsys, "validate", FIXTURES / "request-pair.ndl")
    assert code == 0
    assert out == ""


def test_validate_broadcast_bad_exits_one(capsys):
    code, out, _ = _run(capsys, "validate", FIXTURES / "broadcast-bad.ndl")
    assert code == 1
    assert (
        "VIOLATION Domains in broadcast link can't be repeated "
        "urn:orca:request:bcast-bad/Link/1" in out
    )


def test_validate_malformed_file_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.ndl"
    bad.write_text("<urn:a> <urn:p> .\n")
    code, _, err = _run(capsys, "validate", bad)
    assert code == 2
    assert "error:" in err


def test_entail_emits_closure(capsys):
    code, out, _ = _run(capsys, "entail", FIXTURES / "renci.ndl")
    assert code == 0
    assert "topo:interfaceOf" in out  # inverse materialized


def test_query_bgp(capsys):
    code, out, _ = _run(
        capsys,
        "query",
        FIXTURES / "renci.ndl",
        "--bgp",
        "<http://geni-orca.renci.org/sites/renci/Server/A> topo:hasInterface ?i",
    )
    assert code == 0
    assert out.strip() == "?i=rnc:Server/A/f1/ethernet"


def test_query_path_expr(capsys):
    code, out, _ = _run(
        capsys,
        "query",
        FIXTURES / "renci.ndl",
        "--path-expr",
        "topo:hasInterface/topo:linkedTo/topo:interfaceOf",
        "--from",
        "<http://geni-orca.renci.org/sites/renci/Server/A>",
    )
    assert code == 0
    assert out.strip() == "http://geni-orca.renci.org/sites/renci/Renci/6509"


def test_path_fig_listing(capsys):
    code, out, _ = _run(
        capsys,
        "path",
        FIXTURES / "renci.ndl",
        "--from",
        "<http://geni-orca.renci.org/sites/renci/Server/A>",
        "--to",
        "<http://geni-orca.renci.org/sites/renci/Server/B>",
        "--bandwidth",
        "1000",
    )
    assert code == 0
    lines = out.strip().split("\n")
    hops = [l for l in lines if l.startswith("HOP ")]
    assert hops == [
        "HOP http://geni-orca.renci.org/sites/renci/Server/A",
        "HOP http://geni-orca.renci.org/sites/renci/Renci/6509",
        "HOP http://geni-orca.renci.org/sites/renci/Server/B",
    ]
    assert "LABEL 100" in lines


def test_path_unknown_iri_exits_two(capsys):
    code, _, err = _run(
        capsys,
        "path",
        FIXTURES / "renci.ndl",
        "--from",
        "<urn:nowhere>",
        "--to",
        "<http://geni-orca.renci.org/sites/renci/Server/B>",
    )
    assert code == 2
    assert "unknown element" in err


def test_path_no_path_exits_one(capsys):
    code, out, _ = _run(
        capsys,
        "path",
        FIXTURES / "renci.ndl",
        "--from",
        "<http://geni-orca.renci.org/sites/renci/Server/A>",
        "--to",
        "<http://geni-orca.renci.org/sites/renci/Server/B>",
        "--bandwidth",
        "999999",
    )
    assert code == 1
    assert "NO PATH" in out


def test_path_detours_around_label_exhaustion(capsys):
    # direct a-c border only offers 140-160; label 120 forces the b detour
    code, out, _ = _run(
        capsys,
        "path",
        FIXTURES / "ring-a.ndl",
        FIXTURES / "ring-b.ndl",
        FIXTURES / "ring-c.ndl",
        "--from",
        "<urn:orca:site:a/Host>",
        "--to",
        "<urn:orca:site:c/Host>",
        "--bandwidth",
        "100",
        "--label",
        "120",
    )
    assert code == 0
    hops = [l.split(" ", 1)[1] for l in out.strip().split("\n") if l.startswith("HOP ")]
    assert hops == [
        "urn:orca:site:a/Host",
        "urn:orca:site:a/Switch",
        "urn:orca:site:b/Switch",
        "urn:orca:site:c/Switch",
        "urn:orca:site:c/Host",
    ]


def test_delegate_output_parses(capsys):
    code, out, _ = _run(capsys, "delegate", FIXTURES / "ring-a.ndl")
    assert code == 0
    from netslice.graphstore import parse_document

    delegation = parse_document(out)
    assert len(delegation) > 0
    assert "urn:orca:site:a/Switch/toB" in out


def test_embed_one_shot(capsys, tmp_path):
    out_file = tmp_path / "manifest.ndl"
    code, _, _ = _run(
        capsys,
        "embed",
        FIXTURES / "renci.ndl",
        "--request",
        FIXTURES / "request-pair.ndl",
        "--slice-id",
        "demo1",
        "--out",
        out_file,
    )
    assert code == 0
    golden = (FIXTURES / "golden" / "demo1-manifest.ndl").read_text()
    assert out_file.read_text() == golden


def test_embed_rejects_invalid_request(capsys):
    code, out, _ = _run(
        capsys,
        "embed",
        FIXTURES / "renci.ndl",
        "--request",
        FIXTURES / "broadcast-bad.ndl",
    )
    assert code == 1
    assert "VIOLATION" in out


def test_run_demo_scenario_matches_goldens(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    buffer = io.StringIO()
    code = run_scenario(str(FIXTURES / "demo.scn"), out=buffer)
    assert code == 0
    golden_events = (FIXTURES / "golden" / "demo-events.log").read_text()
    assert buffer.getvalue() == golden_events
    golden_manifest = (FIXTURES / "golden" / "demo1-manifest.ndl").read_text()
    assert (tmp_path / "demo1-manifest.ndl").read_text() == golden_manifest


def test_run_scenario_twice_is_byte_identical(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    outputs = []
    for _ in range(2):
        buffer = io.StringIO()
        assert run_scenario(str(FIXTURES / "ring.scn"), out=buffer) == 0
        outputs.append((buffer.getvalue(), (tmp_path / "bcast1-manifest.ndl").read_text()))
    assert outputs[0] == outputs[1]


def test_run_failed_expectation_exits_one(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    script = tmp_path / "overcap.scn"
    script.write_text(
        f"load-substrate {FIXTURES}/renci.ndl\n"
        f"submit-request {FIXTURES}/broadcast-bad.ndl as s1\n"
        "expect-state s1 Provisioned\n"
    )
    code = main(["run", str(script)])
    captured = capsys.readouterr()
    assert code == 1
    assert "EXPECTATION FAILED" in captured.err


def test_run_bad_script_exits_two(tmp_path, capsys):
    script = tmp_path / "bad.scn"
    script.write_text("frobnicate everything\n")
    code = main(["run", str(script)])
    assert code == 2
