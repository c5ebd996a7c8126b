use std::path::Path;
use std::process::{Command, Output};
use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use contactfit::fit::FitResult;
use contactfit::io::{self, AnnotationDocument};
use contactfit::retrieval::{
    oracle_query, AnnotationStore, ContactAnnotationRecord, EmbeddingRecord, EmbeddingStore, OracleRequest, Provenance,
    Question, RetrievalError,
};
use contactfit_cli::commands::EvalReport;
use contactfit_cli::oracle_http::HttpTransport;
use serde_json::{json, Value};

fn contactfit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contactfit"))
        .args(args)
        .current_dir(dir)
        .env_remove("CONTACTFIT_ORACLE_MODE")
        .env_remove("CONTACTFIT_ORACLE_ENDPOINT")
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn unknown_scenario_lists_the_available_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = contactfit(&["synth", "--scenario", "juggling", "--out", "x"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grasp"));
}

#[test]
fn synth_transfer_fit_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(contactfit(
        &["synth", "--scenario", "grasp", "--out", ".", "--seed", "4"],
        d,
    ));

    ok(contactfit(
        &[
            "transfer",
            "--body",
            "body.obj",
            "--contacts",
            "contacts.json",
            "--object",
            "object.obj",
            "--clicks",
            "clicks.json",
            "--object-scale",
            &init_scale(d).to_string(),
            "--object-id",
            "box",
            "--image-id",
            "grasp-4",
            "--out",
            "again.json",
        ],
        d,
    ));
    let a = io::load_annotation(d.join("annotation.json")).unwrap();
    let b = io::load_annotation(d.join("again.json")).unwrap();
    assert_eq!(a.patches, b.patches);
    assert_eq!(a.patches.len(), 2);

    let fit_args = |out: &str, meshes: &str| {
        vec![
            "fit".to_string(),
            "--annotation".into(),
            "annotation.json".into(),
            "--body-model".into(),
            "body_model.json".into(),
            "--camera".into(),
            "camera.json".into(),
            "--masks".into(),
            "masks".into(),
            "--config".into(),
            "config.json".into(),
            "--object".into(),
            "object.obj".into(),
            "--init".into(),
            "init.json".into(),
            "--out".into(),
            out.into(),
            "--mesh-dir".into(),
            meshes.into(),
        ]
    };
    let args: Vec<String> = fit_args("r1.json", "pred");
    ok(contactfit(&args.iter().map(String::as_str).collect::<Vec<_>>(), d));
    let args: Vec<String> = fit_args("r2.json", "pred2");
    ok(contactfit(&args.iter().map(String::as_str).collect::<Vec<_>>(), d));
    let r1: FitResult = io::load_json(d.join("r1.json")).unwrap();
    let r2: FitResult = io::load_json(d.join("r2.json")).unwrap();
    assert_eq!(r1.without_timing(), r2.without_timing());
    assert_eq!(r1.stages.len(), 3);

    ok(contactfit(
        &["eval", "--pred", "pred", "--gt", "gt", "--out", "report.json"],
        d,
    ));
    let report: EvalReport = io::load_json(d.join("report.json")).unwrap();
    assert_eq!(report.items.len(), 1);
    assert!(report.mean_pa_cd_human < 2.0, "{report:?}");
    assert!(report.mean_pa_cd_object < 3.0, "{report:?}");
    assert!(report.mean_contact_f1.unwrap() > 0.3, "{report:?}");
}

fn init_scale(d: &Path) -> f64 {
    let v: Value = io::load_json(d.join("init.json")).unwrap();
    v["scale"].as_f64().unwrap()
}

#[test]
fn fit_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(contactfit(
        &["synth", "--scenario", "grasp", "--out", ".", "--seed", "2"],
        d,
    ));
    ok(contactfit(
        &[
            "fit",
            "--annotation",
            "annotation.json",
            "--body-model",
            "body_model.json",
            "--camera",
            "camera.json",
            "--masks",
            "masks",
            "--object",
            "object.obj",
            "--init",
            "init.json",
            "--out",
            "r.json",
            "--stages",
            "1",
        ],
        d,
    ));
    let r: FitResult = io::load_json(d.join("r.json")).unwrap();
    assert_eq!(r.stages.len(), 1);

    let out = contactfit(
        &[
            "fit",
            "--annotation",
            "missing.json",
            "--body-model",
            "body_model.json",
            "--camera",
            "camera.json",
            "--masks",
            "masks",
            "--object",
            "object.obj",
            "--init",
            "init.json",
            "--out",
            "r.json",
        ],
        d,
    );
    assert!(!out.status.success());
}

#[test]
fn retrieve_reports_objects_and_annotation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rec = |id: &str, e: [f32; 3]| EmbeddingRecord {
        id: id.into(),
        embedding: e.to_vec(),
        mesh_path: format!("{id}.obj"),
        category: "thing".into(),
    };
    let store = EmbeddingStore::new(
        3,
        vec![
            rec("a", [1.0, 0.0, 0.0]),
            rec("b", [0.0, 1.0, 0.0]),
            rec("c", [1.0, 1.0, 0.0]),
            rec("d", [0.0, 0.0, 1.0]),
        ],
    )
    .unwrap();
    store.save(d.join("store.bin")).unwrap();
    io::save_json(&[2.0f32, 1.0, 0.0], d.join("q.json")).unwrap();
    let ann = |id: u64, object: &str, contacts: &[usize]| ContactAnnotationRecord {
        id,
        image_id: format!("img{id}"),
        body_contacts: contacts.iter().copied().collect(),
        object_id: object.into(),
        patches: vec![],
        correspondences: Default::default(),
        object_scale: 0.4,
    };
    AnnotationStore::new(vec![ann(1, "a", &[1, 2, 3]), ann(2, "b", &[3, 4])])
        .unwrap()
        .save(d.join("ann.json"))
        .unwrap();
    io::save_json(&[3usize, 4, 5], d.join("contacts.json")).unwrap();

    let out = ok(contactfit(
        &[
            "retrieve",
            "--store",
            "store.bin",
            "--query",
            "q.json",
            "--annotations",
            "ann.json",
            "--contacts",
            "contacts.json",
        ],
        d,
    ));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<&str> = v["objects"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["c", "a", "b"]);
    assert_eq!(v["annotation"]["id"], 2);

    io::save_json(&[1.0f32, 0.0], d.join("short.json")).unwrap();
    let out = contactfit(&["retrieve", "--store", "store.bin", "--query", "short.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}

#[test]
fn refine_with_canned_answers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    io::save_body_model(&contactfit::synth::humanoid(), d.join("body.json")).unwrap();
    let model = contactfit::synth::humanoid();
    let sole = model.part_vertices("leftFootSole").unwrap();
    let hand = model.part_vertices("rightHand").unwrap();
    let contacts: Vec<usize> = sole[..3].iter().chain(&hand[..2]).copied().collect();
    io::save_json(&contacts, d.join("contacts.json")).unwrap();
    io::save_json(
        &json!({"img7": {"scale": 0.45, "parts": ["rightHand", "head"]}}),
        d.join("oracle.json"),
    )
    .unwrap();

    let out = ok(contactfit(
        &[
            "refine",
            "--contacts",
            "contacts.json",
            "--body-model",
            "body.json",
            "--image",
            "img7",
            "--object-label",
            "hat",
            "--oracle-file",
            "oracle.json",
        ],
        d,
    ));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let got: Vec<usize> = serde_json::from_value(v["contacts"].clone()).unwrap();
    let mut want: Vec<usize> = hand[..2].to_vec();
    want.extend(model.part_vertices("head").unwrap());
    want.sort();
    assert_eq!(got, want);
    assert_eq!(v["oracle"]["scale"], 0.45);
    assert_eq!(v["oracle"]["provenance"], "canned");

    let out = contactfit(
        &[
            "refine",
            "--contacts",
            "contacts.json",
            "--body-model",
            "body.json",
            "--image",
            "img8",
            "--object-label",
            "hat",
            "--oracle-file",
            "oracle.json",
        ],
        d,
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("img8"));

    let live = Command::new(env!("CARGO_BIN_EXE_contactfit"))
        .args([
            "refine",
            "--contacts",
            "contacts.json",
            "--body-model",
            "body.json",
            "--image",
            "x",
            "--object-label",
            "y",
        ])
        .current_dir(d)
        .env("CONTACTFIT_ORACLE_MODE", "live")
        .env_remove("CONTACTFIT_ORACLE_ENDPOINT")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&live.stderr).contains("CONTACTFIT_ORACLE_ENDPOINT"));
}

async fn fake_oracle(Json(req): Json<OracleRequest>) -> Json<Value> {
    let answer = match (req.question, req.object_label.as_str()) {
        (Question::Scale, "vague") => "approximately two meters",
        (Question::Scale, _) => "0.7",
        (Question::Parts, _) => "leftHand, rightHand",
    };
    Json(json!({ "answer": answer }))
}

#[tokio::test(flavor = "multi_thread")]
async fn live_oracle_over_http() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, Router::new().route("/ask", post(fake_oracle)))
            .await
            .unwrap();
    });
    let endpoint = format!("http://{addr}/ask");
    let (good, vague) = tokio::task::spawn_blocking(move || {
        let client = contactfit::retrieval::OracleClient::live(HttpTransport::new(endpoint, Duration::from_secs(10)));
        (
            oracle_query(&client, "img", "chair"),
            oracle_query(&client, "img", "vague"),
        )
    })
    .await
    .unwrap();
    let good = good.unwrap();
    assert_eq!(good.scale, Some(0.7));
    assert_eq!(good.parts, Some(vec!["leftHand".to_string(), "rightHand".to_string()]));
    assert_eq!(good.provenance, Provenance::Live);
    assert!(matches!(vague, Err(RetrievalError::MalformedAnswer { .. })));

    let dead = tokio::task::spawn_blocking(|| {
        let client = contactfit::retrieval::OracleClient::live(HttpTransport::new(
            "http://127.0.0.1:9/ask",
            Duration::from_millis(500),
        ));
        oracle_query(&client, "img", "chair")
    })
    .await
    .unwrap();
    assert!(matches!(dead, Err(RetrievalError::Transport(_))));
}

#[test]
fn annotation_from_synth_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    ok(contactfit(&["synth", "--scenario", "grasp", "--out", "s"], dir.path()));
    let doc: AnnotationDocument = io::load_annotation(dir.path().join("s/annotation.json")).unwrap();
    let object = io::load_mesh_file(dir.path().join("s/object.obj")).unwrap();
    doc.check_clicks(|_| Some(&object)).unwrap();
}
