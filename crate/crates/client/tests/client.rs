use std::time::Duration;

use teleop_client::{run_latency_bench, BridgeClient, ClientError, HttpClient};
use teleop_core::scenario::Scenario;
use teleop_core::wire::{Tag, WireFrame};
use teleop_core::RobotKind;
use teleop_service::{Bridge, BridgeConfig};

async fn start() -> Bridge {
    Bridge::start(BridgeConfig::loopback(Scenario::default())).await.unwrap()
}

#[tokio::test]
async fn latency_bench_reports_halved_mean() {
    let bridge = start().await;
    let http = HttpClient::for_addr(bridge.http_addr().unwrap());
    let r = run_latency_bench(bridge.wire_addr(), Some(&http), 50).await.unwrap();
    assert_eq!(r.samples.len(), 50);
    assert_eq!(r.one_way, r.rtt_mean / 2.0);
    assert!(r.bridge_processing.is_some());
    let r = run_latency_bench(bridge.wire_addr(), None, 5).await.unwrap();
    assert_eq!(r.bridge_processing, None);
    assert!(matches!(
        run_latency_bench(bridge.wire_addr(), None, 0).await,
        Err(ClientError::Metrics(_))
    ));
    bridge.shutdown().await;
}

#[tokio::test]
async fn wire_replies() {
    let bridge = start().await;
    let mut c = BridgeClient::connect(bridge.wire_addr()).await.unwrap();
    c.send(WireFrame::new(Tag::Joint(1), 10)).await.unwrap();
    let r = c.reply(Duration::from_secs(5)).await.unwrap();
    assert_eq!((r.tag, r.value), (Tag::Error, 1));
    let status = c
        .recv_matching(Duration::from_secs(5), |f| f.tag == Tag::Status)
        .await
        .unwrap();
    assert_eq!(status.value, 0);
    bridge.shutdown().await;
}

#[tokio::test]
async fn http_wrappers() {
    let bridge = start().await;
    let http = HttpClient::for_addr(bridge.http_addr().unwrap());
    assert_eq!(http.tags().await.unwrap().len(), 29);
    let pose = http.fk(RobotKind::Panda, vec![0.0, 0.0, 0.0, -1.5, 0.0, 1.5, 0.0]).await.unwrap();
    let ik = http.ik(RobotKind::Panda, pose, None).await.unwrap();
    assert!(ik.converged());
    assert!(matches!(http.fk(RobotKind::Panda, vec![]).await, Err(ClientError::Api(_))));
    assert_eq!(http.state().await.unwrap().arms.len(), 2);
    bridge.shutdown().await;
}

#[tokio::test]
async fn refused_connection() {
    let bridge = start().await;
    let addr = bridge.wire_addr();
    bridge.shutdown().await;
    assert!(matches!(BridgeClient::connect(addr).await, Err(ClientError::Connect { .. })));
}
