//! Command line behaviour and JSON round trips.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use unirigid::cli::{run, EXIT_FAILURE, EXIT_INPUT, EXIT_OK};
use unirigid::format::{to_json, CertificateDoc, FrameworkDoc, GraphDoc, SequenceDoc};
use unirigid_core::{certify_gur, random_sequence, verify_claim, witness_sur, Tolerances};

const GUR_SEQUENCE: &str = r#"{"version":1,"dimension":2,"steps":[
  {"op":"hennenberg","remove":[0,1],"extra":[2]},
  {"op":"add_edge","edge":[0,1]},
  {"op":"hennenberg","remove":[1,4],"extra":[3]}
]}"#;

const PURE_SEQUENCE: &str = r#"{"version":1,"dimension":2,"steps":[
  {"op":"hennenberg","remove":[0,1],"extra":[2]},
  {"op":"hennenberg","remove":[1,4],"extra":[3]}
]}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn unirigid(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("unirigid").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_complete_graph_from_dimension() {
    let r = unirigid(&["build", "--dim", "3"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let g: GraphDoc = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(g.num_vertices, 5);
    assert_eq!(g.edges.len(), 10);
    assert_eq!(g.edges[0], [0, 1]);
}

#[test]
fn build_replays_a_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let seq = write(dir.path(), "seq.json", GUR_SEQUENCE);
    let r = unirigid(&["build", s(&seq)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let g = serde_json::from_str::<GraphDoc>(&r.stdout)
        .unwrap()
        .to_graph()
        .unwrap();
    assert_eq!(g.num_vertices(), 6);
    assert_eq!(g.num_edges(), 6 + 2 + 1 + 2);

    let r = unirigid(&["build", s(&seq), "--dim", "3"]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("does not match"));
}

#[test]
fn certify_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let seq = write(dir.path(), "seq.json", GUR_SEQUENCE);
    let cert = dir.path().join("cert.json");
    let r = unirigid(&["--seed", "5", "certify-gur", s(&seq), "--out", s(&cert)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.is_empty());

    let doc: Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(doc["version"], 1);
    assert_eq!(doc["kind"], "gur");
    assert_eq!(doc["nullity"], 3);
    assert_eq!(doc["classification"], "psd");
    assert_eq!(doc["seed"], 5);
    assert_eq!(doc["provenance"]["steps"].as_array().unwrap().len(), 3);
    assert!(doc["provenance"]["steps"][0]["split"]["a"].is_number());
    assert!(doc["provenance"]["steps"][1]["split"].is_null());

    let r = unirigid(&["verify", s(&cert)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let report: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn tampered_certificates_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let seq = write(dir.path(), "seq.json", GUR_SEQUENCE);
    let cert = dir.path().join("cert.json");
    assert_eq!(
        unirigid(&["certify-gur", s(&seq), "--out", s(&cert)]).code,
        EXIT_OK
    );
    let original: Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();

    let tamper = |f: &dyn Fn(&mut Value)| {
        let mut doc = original.clone();
        f(&mut doc);
        let p = write(dir.path(), "bad.json", &doc.to_string());
        unirigid(&["verify", s(&p)])
    };

    let r = tamper(&|d| {
        let w = d["stress"][0].as_f64().unwrap();
        d["stress"][0] = Value::from(w * 1.001);
    });
    assert_eq!(r.code, EXIT_FAILURE);
    assert!(r.stderr.contains("equilibrium"), "{}", r.stderr);

    let r = tamper(&|d| {
        let x = d["framework"]["coordinates"][0][0].as_f64().unwrap();
        d["framework"]["coordinates"][0][0] = Value::from(x + 1.0);
    });
    assert_eq!(r.code, EXIT_FAILURE);

    let r = tamper(&|d| d["nullity"] = Value::from(2));
    assert_eq!(r.code, EXIT_FAILURE);

    let r = tamper(&|d| d["classification"] = Value::from("indefinite"));
    assert_eq!(r.code, EXIT_FAILURE);

    let r = tamper(&|d| d["graph"]["edges"][0] = serde_json::json!([0, 5]));
    assert_eq!(r.code, EXIT_FAILURE);
    assert!(r.stderr.contains("graph-field"), "{}", r.stderr);

    let r = tamper(&|d| d["kind"] = Value::from("sur-witness"));
    assert_eq!(r.code, EXIT_FAILURE);

    let r = tamper(&|d| d["version"] = Value::from(2));
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn witness_and_its_companion_verify() {
    let dir = tempfile::tempdir().unwrap();
    let seq = write(dir.path(), "pure.json", PURE_SEQUENCE);
    let r = unirigid(&["witness-sur", s(&seq)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(doc["kind"], "sur-witness");
    assert_eq!(doc["classification"], "indefinite");
    assert_eq!(doc["provenance"]["stress_space_dimension"], 1);
    assert_eq!(doc["provenance"]["gur_companion"]["classification"], "psd");
    let last = doc["provenance"]["steps"]
        .as_array()
        .unwrap()
        .last()
        .unwrap()
        .clone();
    assert_eq!(last["split"]["mode"], "sur");
    assert!(last["split"]["diagonal_probe"].as_f64().unwrap() < 0.0);

    let cert = write(dir.path(), "w.json", &r.stdout);
    assert_eq!(unirigid(&["verify", s(&cert)]).code, EXIT_OK);

    // A sequence with an edge addition has a two-dimensional stress space.
    let seq = write(dir.path(), "seq.json", GUR_SEQUENCE);
    let r = unirigid(&["witness-sur", s(&seq)]);
    assert_eq!(r.code, EXIT_FAILURE);
    assert!(r.stderr.contains("stress-space-not-unique"), "{}", r.stderr);
}

#[test]
fn malformed_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let truncated = write(
        dir.path(),
        "t.json",
        "{\"version\": 1,\n \"dimension\": 2,\n \"steps\": [",
    );
    let r = unirigid(&["certify-gur", s(&truncated)]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("line 3"), "{}", r.stderr);

    let missing = write(dir.path(), "m.json", r#"{"version": 1, "steps": []}"#);
    let r = unirigid(&["certify-gur", s(&missing)]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("dimension"), "{}", r.stderr);

    let bad_op = write(
        dir.path(),
        "o.json",
        r#"{"version": 1, "dimension": 2, "steps": [{"op": "twist"}]}"#,
    );
    assert_eq!(unirigid(&["certify-gur", s(&bad_op)]).code, EXIT_INPUT);

    let r = unirigid(&["certify-gur", s(&dir.path().join("absent.json"))]);
    assert_eq!(r.code, EXIT_INPUT);

    let r = unirigid(&["--tol", "-1", "build", "--dim", "2"]);
    assert_eq!(r.code, EXIT_INPUT);

    let r = unirigid(&["frobnicate"]);
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn pipeline_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // Edge (0, 9) does not exist in K_4.
    let seq = write(
        dir.path(),
        "s.json",
        r#"{"version":1,"dimension":2,"steps":[{"op":"hennenberg","remove":[0,9],"extra":[2]}]}"#,
    );
    let r = unirigid(&["certify-gur", s(&seq)]);
    assert_eq!(r.code, EXIT_FAILURE);
    assert!(r.stderr.contains("invalid-sequence"), "{}", r.stderr);
}

#[test]
fn check_reports_rigidity_properties() {
    let tol = Tolerances::default();
    let cert = certify_gur(&random_sequence(2, 3, 1, 12).unwrap(), 1, &tol).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "f.json",
        &to_json(&FrameworkDoc::from(&cert.framework)),
    );
    let r = unirigid(&["check", s(&f)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(doc["infinitesimal_rigidity"]["rigid"], true);
    assert_eq!(doc["redundant_rigidity"]["redundant"], true);
    assert_eq!(doc["hendrickson"]["pass"], true);
    assert!(doc["conic_at_infinity"].is_null());
    assert_eq!(doc["stress_space_dimension"], 2);

    // A square with axis-aligned sides: flexible, on a conic at infinity.
    let square = write(
        dir.path(),
        "sq.json",
        r#"{"version":1,"num_vertices":4,"edges":[[0,1],[1,2],[2,3],[0,3]],"dimension":2,
            "coordinates":[[0,0],[1,0],[1,1],[0,1]]}"#,
    );
    let r = unirigid(&["check", s(&square)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(doc["infinitesimal_rigidity"]["rigid"], false);
    assert!(doc["redundant_rigidity"].is_null());
    assert!(doc["conic_at_infinity"]["q"].is_array());
    assert_eq!(doc["vertex_connectivity"], 2);

    let wrong = write(
        dir.path(),
        "w.json",
        r#"{"version":1,"num_vertices":2,"edges":[[0,1]],"dimension":2,"coordinates":[[0,0],[1]]}"#,
    );
    assert_eq!(unirigid(&["check", s(&wrong)]).code, EXIT_INPUT);
}

#[test]
fn audit_reports_every_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let seq = write(dir.path(), "seq.json", GUR_SEQUENCE);
    let r = unirigid(&["audit-stress-dim", s(&seq)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(
        doc["stress_space_dimensions"],
        serde_json::json!([1, 1, 2, 2])
    );
}

#[test]
fn batches_write_one_certificate_per_input() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", GUR_SEQUENCE);
    let b = write(dir.path(), "b.json", PURE_SEQUENCE);
    let out = dir.path().join("certs");
    let r = unirigid(&["--jobs", "2", "--out", s(&out), "certify-gur", s(&a), s(&b)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    for name in ["a.cert.json", "b.cert.json"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(
            unirigid(&["verify", s(&out.join(name))]).code,
            EXIT_OK,
            "{text}"
        );
    }
    // Without --out there is nowhere to put several certificates.
    assert_eq!(unirigid(&["certify-gur", s(&a), s(&b)]).code, EXIT_INPUT);
    // One failing input fails the batch but the others are still written.
    let c = write(
        dir.path(),
        "c.json",
        r#"{"version":1,"dimension":2,"steps":[{"op":"add_edge","edge":[0,1]}]}"#,
    );
    let out2 = dir.path().join("mixed");
    let r = unirigid(&["--out", s(&out2), "certify-gur", s(&a), s(&c)]);
    assert_eq!(r.code, EXIT_FAILURE);
    assert!(out2.join("a.cert.json").exists());
    assert!(!out2.join("c.cert.json").exists());
}

#[test]
fn documents_round_trip() {
    let tol = Tolerances::default();
    let seq = random_sequence(3, 3, 0, 2).unwrap();
    let seq_doc = SequenceDoc::from(&seq);
    let back: SequenceDoc = serde_json::from_str(&to_json(&seq_doc)).unwrap();
    assert_eq!(back.to_sequence().unwrap(), seq);

    for cert in [
        certify_gur(&seq, 2, &tol).unwrap(),
        witness_sur(&seq, 2, &tol).unwrap(),
    ] {
        let doc = CertificateDoc::from(&cert);
        let text = to_json(&doc);
        let parsed: CertificateDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, doc);
        // Reals survive the text form bit for bit.
        assert_eq!(to_json(&parsed), text);
        let parts = parsed.to_claim().unwrap();
        assert_eq!(parts.framework, cert.framework);
        assert_eq!(parts.stress, cert.stress);
        assert!(parts.graph_matches);
        assert!(verify_claim(&parts.claim()).passed());
    }
}
