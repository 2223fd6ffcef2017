use std::path::PathBuf;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

use rpys_core::disambiguation::ClusterParams;
use rpys_core::ingest::{parse_export, ImportConfig};
use rpys_core::store::{decode_workspace, render_cr_table, render_graph, Operation, Workspace};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn corpus() -> Vec<u8> {
    std::fs::read(fixture("synthetic_corpus.txt")).unwrap()
}

fn local_workspace() -> Workspace {
    let text = String::from_utf8(corpus()).unwrap();
    let (records, _) = parse_export(&text, &ImportConfig::default()).unwrap();
    Workspace::aggregate(records, ImportConfig::default())
}

async fn spawn(config: rpys_service::ServiceConfig) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(rpys_service::serve(listener, rpys_service::router(config)));
    format!("http://{addr}")
}

struct Api {
    http: Client,
    base: String,
}

impl Api {
    async fn start() -> Self {
        Self::with(Default::default()).await
    }

    async fn with(config: rpys_service::ServiceConfig) -> Self {
        Api {
            http: Client::new(),
            base: spawn(config).await,
        }
    }

    async fn create(&self, body: Vec<u8>, query: &str) -> (StatusCode, Value) {
        let resp = self
            .http
            .post(format!("{}/sessions{query}", self.base))
            .body(body)
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn session(&self) -> (String, Value) {
        let (status, v) = self.create(corpus(), "").await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        (v["session_id"].as_str().unwrap().to_owned(), v)
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let resp = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn text(&self, path: &str) -> (StatusCode, String) {
        let resp = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        (resp.status(), resp.text().await.unwrap())
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }
}

fn counts() -> Value {
    serde_json::from_slice(&std::fs::read(fixture("synthetic_corpus.counts.json")).unwrap())
        .unwrap()
}

#[tokio::test]
async fn create_reports_oracle_counts() {
    let api = Api::start().await;
    let (id, v) = api.session().await;
    let oracle = counts();
    assert_eq!(v["version"], 0);
    assert_eq!(v["info"]["records"], oracle["records"]);
    assert_eq!(v["info"]["cr_mentions"], oracle["cr_mentions"]);
    assert_eq!(v["info"]["distinct_variants"], oracle["distinct_variants"]);
    let (status, again) = api.get(&format!("/sessions/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["info"], v["info"]);
}

#[tokio::test]
async fn spectrum_and_drilldown_agree() {
    let api = Api::start().await;
    let (id, _) = api.session().await;
    let (status, spec) = api.get(&format!("/sessions/{id}/spectrum")).await;
    assert_eq!(status, StatusCode::OK);
    let points = spec.as_array().unwrap();
    assert!(!points.is_empty());
    // Years are dense.
    for w in points.windows(2) {
        assert_eq!(
            w[1]["rpy"].as_i64().unwrap(),
            w[0]["rpy"].as_i64().unwrap() + 1
        );
    }
    let busiest = points
        .iter()
        .max_by_key(|p| p["ncr"].as_u64().unwrap())
        .unwrap();
    let rpy = busiest["rpy"].as_i64().unwrap();
    let (status, refs) = api
        .get(&format!("/sessions/{id}/years/{rpy}/refs?sort=ncr"))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(refs["total_ncr"], busiest["ncr"]);
    let rows = refs["refs"].as_array().unwrap();
    assert_eq!(rows.len() as u64, busiest["distinct"].as_u64().unwrap());
    let ncrs: Vec<u64> = rows.iter().map(|r| r["ncr"].as_u64().unwrap()).collect();
    assert!(ncrs.windows(2).all(|w| w[0] >= w[1]));
    let total = refs["total_ncr"].as_f64().unwrap();
    for r in rows {
        let share = r["share"].as_f64().unwrap();
        assert_eq!(share, r["ncr"].as_f64().unwrap() / total);
        assert_eq!(r["above_threshold"].as_bool().unwrap(), share > 0.1);
    }

    let (status, sub) = api
        .get(&format!("/sessions/{id}/spectrum?lo={rpy}&hi={rpy}"))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(sub.as_array().unwrap().len(), 1);
    assert_eq!(sub[0]["ncr"], busiest["ncr"]);
}

#[tokio::test]
async fn merge_is_read_your_writes_and_split_undoes_it() {
    let api = Api::start().await;
    let (id, created) = api.session().await;
    let local = local_workspace();
    // A year with at least two variants, chosen from the local copy.
    let mut by_year = std::collections::BTreeMap::<i32, Vec<_>>::new();
    for v in local.variants() {
        if let Some(y) = v.rpy() {
            by_year.entry(y).or_default().push(v.variant_id);
        }
    }
    let (rpy, ids) = by_year.into_iter().find(|(_, ids)| ids.len() >= 2).unwrap();
    let pair = vec![ids[0], ids[1]];
    let mut expected = local.clone();
    expected.manual_merge(&pair).unwrap().unwrap();

    let (status, v) = api
        .post(
            &format!("/sessions/{id}/merge"),
            json!({"variant_ids": pair, "expected_version": 0}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["version"], 1);
    assert_eq!(
        v["info"]["distinct_variants"].as_u64().unwrap(),
        created["info"]["distinct_variants"].as_u64().unwrap() - 1
    );
    let merged_id = v["merged_id"].clone();

    let (_, spec) = api
        .get(&format!("/sessions/{id}/spectrum?lo={rpy}&hi={rpy}"))
        .await;
    let want: usize = expected
        .variants()
        .iter()
        .filter(|v| v.rpy() == Some(rpy))
        .map(|v| v.ncr)
        .sum();
    assert_eq!(spec[0]["ncr"].as_u64().unwrap() as usize, want);
    let (_, refs) = api.get(&format!("/sessions/{id}/years/{rpy}/refs")).await;
    let row = refs["refs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["variant_id"] == merged_id)
        .unwrap();
    assert_eq!(row["manually_merged"], true);

    let (status, v) = api
        .post(
            &format!("/sessions/{id}/split"),
            json!({"variant_id": merged_id, "expected_version": 1}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["version"], 2);
    assert_eq!(v["info"], created["info"]);
    assert_eq!(v["restored"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn concurrent_merges_one_wins_one_conflicts() {
    let api = Api::start().await;
    let (id, _) = api.session().await;
    let (_, refs) = api.get(&format!("/sessions/{id}/spectrum")).await;
    let rpy = refs
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["distinct"].as_u64().unwrap() >= 3)
        .unwrap()["rpy"]
        .as_i64()
        .unwrap();
    let (_, year) = api.get(&format!("/sessions/{id}/years/{rpy}/refs")).await;
    let ids: Vec<Value> = year["refs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["variant_id"].clone())
        .collect();
    let url = format!("/sessions/{id}/merge");
    let a = api.post(
        &url,
        json!({"variant_ids": [ids[0], ids[1]], "expected_version": 0}),
    );
    let b = api.post(
        &url,
        json!({"variant_ids": [ids[1], ids[2]], "expected_version": 0}),
    );
    let ((sa, va), (sb, vb)) = tokio::join!(a, b);
    let mut statuses = [sa, sb];
    statuses.sort();
    assert_eq!(
        statuses,
        [StatusCode::OK, StatusCode::CONFLICT],
        "{va} {vb}"
    );
    let conflict = if sa == StatusCode::CONFLICT { va } else { vb };
    assert_eq!(conflict["error"], "version_conflict");
    assert_eq!(conflict["current_version"], 1);
    let (_, s) = api.get(&format!("/sessions/{id}")).await;
    assert_eq!(s["version"], 1);
}

#[tokio::test]
async fn version_advances_by_one_and_history_replays() {
    let api = Api::start().await;
    let (id, _) = api.session().await;
    let (s, v) = api
        .post(
            &format!("/sessions/{id}/cluster"),
            json!({"threshold": 0.75, "use_volume": true, "use_page": true, "use_doi": false, "expected_version": 0}),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["version"], 1);
    let oracle_groups = counts()["planted_groups"].as_array().unwrap().len() as u64;
    assert!(v["multi_member"].as_u64().unwrap() >= oracle_groups);
    assert!(v["merge"].is_object());

    let (s, v) = api
        .post(
            &format!("/sessions/{id}/filter"),
            json!({"markers": ["author=Liu,rpy=1960", {"first_author_prefix": "Perez", "rpy": 1987,
                   "volume": null, "start_page": null, "doi": null}],
                   "mode": "any", "expected_version": 1}),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["version"], 2);
    assert_eq!(
        v["retained"].as_u64().unwrap(),
        v["info"]["records"].as_u64().unwrap()
    );

    let (s, v) = api
        .post(
            &format!("/sessions/{id}/remove-ncr"),
            json!({"lo": 0, "hi": 1, "expected_version": 2}),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["version"], 3);
    let final_info = v["info"].clone();

    let (_, h) = api.get(&format!("/sessions/{id}/history")).await;
    assert_eq!(h["version"], 3);
    let ops: Vec<Operation> = serde_json::from_value(h["operations"].clone()).unwrap();
    let names: Vec<&str> = ops.iter().map(Operation::name).collect();
    assert_eq!(
        names,
        [
            "import",
            "cluster",
            "merge",
            "cocitation_filter",
            "remove_by_ncr"
        ]
    );
    let local = local_workspace();
    let replayed = Workspace::replay(local.records().to_vec(), &ops).unwrap();
    assert_eq!(serde_json::to_value(replayed.info()).unwrap(), final_info);
    let (_, cr) = api
        .text(&format!("/sessions/{id}/export?type=CSV_CR"))
        .await;
    assert_eq!(cr, render_cr_table(&replayed));
}

#[tokio::test]
async fn export_bytes_match_core_rendering() {
    let api = Api::start().await;
    let (id, _) = api.session().await;
    let mut local = local_workspace();
    let params = ClusterParams {
        threshold: 0.75,
        use_volume: true,
        use_page: true,
        use_doi: false,
    };
    local.apply_clustering(&params).unwrap();
    local.merge_last_assignment().unwrap();
    let (s, _) = api
        .post(
            &format!("/sessions/{id}/cluster"),
            json!({"threshold": 0.75, "use_doi": false, "expected_version": 0}),
        )
        .await;
    assert_eq!(s, StatusCode::OK);
    let resp = api
        .http
        .get(format!("{}/sessions/{id}/export?type=CSV_GRAPH", api.base))
        .send()
        .await
        .unwrap();
    assert!(resp.headers()["content-type"]
        .to_str()
        .unwrap()
        .starts_with("text/csv"));
    assert_eq!(
        resp.bytes().await.unwrap(),
        render_graph(&local).unwrap().as_bytes()
    );
    let (_, cr) = api.text(&format!("/sessions/{id}/export")).await;
    assert_eq!(cr, render_cr_table(&local));
}

#[tokio::test]
async fn workspace_download_reopens_as_a_session() {
    let api = Api::start().await;
    let (id, created) = api.session().await;
    api.post(
        &format!("/sessions/{id}/remove-ncr"),
        json!({"lo": 0, "hi": 1, "expected_version": 0}),
    )
    .await;
    let bytes = api
        .http
        .get(format!("{}/sessions/{id}/workspace", api.base))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    let ws = decode_workspace(&bytes).unwrap();
    assert!(
        ws.info().distinct_variants
            < created["info"]["distinct_variants"].as_u64().unwrap() as usize
    );
    let (s, v) = api.create(bytes.to_vec(), "").await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert!(v.get("report").is_none());
    assert_eq!(v["info"], serde_json::to_value(ws.info()).unwrap());
    let (_, a) = api.text(&format!("/sessions/{id}/export")).await;
    let (_, b) = api
        .text(&format!(
            "/sessions/{}/export",
            v["session_id"].as_str().unwrap()
        ))
        .await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn import_windows_come_from_the_query() {
    let api = Api::start().await;
    let (s, v) = api
        .create(corpus(), "?rpy=1900:1995:false&py=1962:2018:false&max_cr=6")
        .await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let cfg = ImportConfig {
        rpy_window: Some("1900:1995:false".parse().unwrap()),
        py_window: Some("1962:2018:false".parse().unwrap()),
        max_cr_per_record: 6,
    };
    let text = String::from_utf8(corpus()).unwrap();
    let (records, _) = parse_export(&text, &cfg).unwrap();
    let ws = Workspace::aggregate(records, cfg);
    assert_eq!(v["info"], serde_json::to_value(ws.info()).unwrap());

    let (s, v) = api.create(corpus(), "?rpy=1995:1900").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["field"], "rpy");
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let api = Api::start().await;
    for path in [
        "/sessions/nope",
        "/sessions/nope/spectrum",
        "/sessions/nope/history",
    ] {
        let (s, v) = api.get(path).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{path}");
        assert_eq!(v["error"], "not_found");
    }
    let (s, _) = api
        .post(
            "/sessions/nope/remove-ncr",
            json!({"lo": 0, "hi": 1, "expected_version": 0}),
        )
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (id, _) = api.session().await;
    let resp = api
        .http
        .delete(format!("{}/sessions/{id}", api.base))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::NO_CONTENT);
    assert_eq!(
        api.get(&format!("/sessions/{id}")).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn invalid_arguments_are_422_with_fields() {
    let api = Api::start().await;
    let (id, _) = api.session().await;
    let cases = [
        (
            "cluster",
            json!({"threshold": 1.5, "expected_version": 0}),
            Some("threshold"),
        ),
        (
            "merge",
            json!({"variant_ids": [0], "expected_version": 0}),
            Some("variant_ids"),
        ),
        (
            "remove-ncr",
            json!({"lo": 5, "hi": 1, "expected_version": 0}),
            Some("N_CR"),
        ),
        (
            "filter",
            json!({"markers": ["rpy=1960"], "expected_version": 0}),
            Some("marker"),
        ),
        (
            "filter",
            json!({"markers": [], "expected_version": 0}),
            Some("markers"),
        ),
        (
            "split",
            json!({"variant_id": 0, "expected_version": 0}),
            Some("variant_id"),
        ),
        ("merge", json!({"variant_ids": "x"}), None),
    ];
    for (op, body, field) in cases {
        let (s, v) = api
            .post(&format!("/sessions/{id}/{op}"), body.clone())
            .await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{op} {body} -> {v}");
        assert_eq!(v["field"].as_str(), field, "{op} {body} -> {v}");
    }
    for path in [
        "peaks?min_dev=abc",
        "spectrum?lo=x",
        "years/19x0/refs",
        "years/1960/refs?sort=size",
        "export?type=XLS",
    ] {
        let (s, v) = api.get(&format!("/sessions/{id}/{path}")).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{path} -> {v}");
        assert!(v["message"].is_string());
    }
    // Nothing above changed the session.
    assert_eq!(api.get(&format!("/sessions/{id}")).await.1["version"], 0);

    let (s, v) = api.create(b"not an export".to_vec(), "").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["field"], "file");
}

#[tokio::test]
async fn oversized_uploads_are_413() {
    let api = Api::with(rpys_service::ServiceConfig {
        max_upload: 1024,
        assets: None,
    })
    .await;
    let (s, v) = api.create(corpus(), "").await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(v["error"], "too_large");
}

#[tokio::test]
async fn peaks_are_spectrum_points_above_min_dev() {
    let api = Api::start().await;
    let (id, _) = api.session().await;
    let (_, spec) = api.get(&format!("/sessions/{id}/spectrum")).await;
    let (s, peaks) = api.get(&format!("/sessions/{id}/peaks?min_dev=2")).await;
    assert_eq!(s, StatusCode::OK);
    let spec = spec.as_array().unwrap();
    for p in peaks.as_array().unwrap() {
        assert!(p["median_dev"].as_f64().unwrap() >= 2.0);
        let i = spec
            .iter()
            .position(|q| q == p)
            .expect("peak is a spectrum point");
        let ncr = |j: usize| spec[j]["ncr"].as_u64().unwrap();
        if i > 0 {
            assert!(ncr(i) > ncr(i - 1));
        }
    }
}

#[tokio::test]
async fn static_assets_are_served_at_root() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>explorer</h1>").unwrap();
    let api = Api::with(rpys_service::ServiceConfig {
        assets: Some(dir.path().to_owned()),
        ..Default::default()
    })
    .await;
    let resp = api.http.get(format!("{}/", api.base)).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.text().await.unwrap(), "<h1>explorer</h1>");
    // The API works without any UI.
    let bare = Api::start().await;
    assert_eq!(bare.session().await.1["version"], 0);
}
