use ps2f_cli::service::FrameQueue;
use ps2f_cli::wire::{lines, parse_inbound, ErrorFrame, Inbound, Margins, TelemetryFrame};
use ps2f_core::sim::StepRecord;
use std::time::Duration;

fn record() -> StepRecord {
    StepRecord {
        k: 7,
        x: vec![0.1, -0.2, 0.3],
        u_ext: vec![10.0, 10.0],
        u: vec![1.5, -2.0],
        value: Some(4.25),
        a: Some(0.5),
        m: Some(5),
        stage_cost: 1.75,
        x_margins: vec![0.6, 0.4, 0.3, 0.7, 1.3, 0.7],
        u_margins: vec![11.5, 8.5, 8.0, 12.0],
        nominal_status: None,
        filter_status: None,
        used_fallback: true,
        t_nominal_ms: 0.0,
        t_filter_ms: 0.0,
    }
}

#[test]
fn inbound_messages_parse() {
    assert_eq!(parse_inbound(r#"{"type":"cmd","u":[10,-3.5]}"#, 2, 3), Ok(Inbound::Cmd { u: vec![10.0, -3.5] }));
    assert_eq!(parse_inbound(r#"{"type":"set_a","a":0.5}"#, 2, 3), Ok(Inbound::SetA { a: 0.5 }));
    assert_eq!(parse_inbound(r#" {"type":"pause"} "#, 2, 3), Ok(Inbound::Pause));
    assert_eq!(parse_inbound(r#"{"type":"reset","x":[0,0,0]}"#, 2, 3), Ok(Inbound::Reset { x: vec![0.0; 3] }));
}

#[test]
fn malformed_inbound_messages_are_rejected() {
    for bad in [
        "",
        "not json",
        "[1,2]",
        r#"{"type":"warp"}"#,
        r#"{"u":[1,2]}"#,
        r#"{"type":"cmd"}"#,
        r#"{"type":"cmd","u":[1]}"#,
        r#"{"type":"cmd","u":[1,2,3]}"#,
        r#"{"type":"cmd","u":["a",2]}"#,
        r#"{"type":"cmd","u":[1,2],"extra":1}"#,
        r#"{"type":"cmd","u":[1e999,2]}"#,
        r#"{"type":"set_a"}"#,
        r#"{"type":"set_a","a":"big"}"#,
        r#"{"type":"reset","x":[0,0]}"#,
    ] {
        assert!(parse_inbound(bad, 2, 3).is_err(), "accepted {bad:?}");
    }
}

#[test]
fn multi_line_messages_split() {
    let text = "{\"type\":\"pause\"}\n\n  {\"type\":\"pause\"}\r\n";
    assert_eq!(lines(text).count(), 2);
}

#[test]
fn frame_wire_names() {
    let frame = TelemetryFrame::from_record(&record(), 1.4, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]);
    let line = frame.to_line();
    assert!(line.ends_with('\n') && !line[..line.len() - 1].contains('\n'));
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["type"], "frame");
    assert_eq!(v["schema"], "ps2f-log-v1");
    assert_eq!(v["k"], 7);
    assert_eq!(v["V"], 4.25);
    assert_eq!(v["M"], 5);
    assert_eq!(v["a"], 0.5);
    assert_eq!(v["used_fallback"], true);
    assert_eq!(v["u_applied"][1], -2.0);
    assert_eq!(v["s2_boundary"][1][0], 1.0);
    assert_eq!(v["s2_boundary_k"], 7);
    assert_eq!(v["margins"]["u"][3], 12.0);
    for key in ["t_wall", "x", "u_ext", "stage_cost"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let back: TelemetryFrame = serde_json::from_str(&line).unwrap();
    assert_eq!(back, frame);
}

#[test]
fn margins_minimum() {
    let m = Margins { x: vec![0.3, 0.2], u: vec![-0.1, 4.0] };
    assert_eq!(m.min(), -0.1);
}

#[test]
fn error_frames() {
    let v: serde_json::Value = serde_json::from_str(&ErrorFrame::new("bad").to_line()).unwrap();
    assert_eq!(v["type"], "error");
    assert_eq!(v["message"], "bad");
}

#[test]
fn queue_drops_oldest() {
    let q = FrameQueue::new(3);
    for i in 0..5 {
        q.push(i.to_string());
    }
    assert_eq!(q.len(), 3);
    assert_eq!(q.dropped(), 2);
    assert_eq!(q.drain(Duration::ZERO), vec!["2", "3", "4"]);
    assert!(q.is_empty());
    assert!(q.drain(Duration::from_millis(10)).is_empty());
}
