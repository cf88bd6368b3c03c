use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use crossbeacon::ble::crc24;
use crossbeacon::localization::Spot;
use crossbeacon::{
    canonical_packet, emulate_packet, estimate_prr, multilaterate, wknn_locate, EmulationConfig, FingerprintDatabase,
    QamOrder, Variant,
};

fn ble(c: &mut Criterion) {
    let pkt = canonical_packet(38).unwrap();
    let mut pdu = pkt.pdu_header.to_vec();
    pdu.extend_from_slice(&pkt.adv_address);
    pdu.extend_from_slice(&pkt.ad_payload);
    c.bench_function("crc24 iBeacon PDU", |b| b.iter(|| crc24(black_box(&pdu), 0x555555)));
    c.bench_function("assemble canonical packet", |b| b.iter(|| canonical_packet(black_box(39)).unwrap()));
}

fn emulation(c: &mut Criterion) {
    let pkt = canonical_packet(38).unwrap();
    let mut g = c.benchmark_group("emulate packet");
    for (name, v, q) in [
        ("adjusted cp-only", Variant::Adjusted, QamOrder::Off),
        ("enhanced cp-only", Variant::Enhanced, QamOrder::Off),
        ("adjusted 64-qam", Variant::Adjusted, QamOrder::Qam64),
    ] {
        let cfg = EmulationConfig::with_variant(v, q);
        g.bench_function(name, |b| b.iter(|| emulate_packet(black_box(&pkt), &cfg).unwrap()));
    }
    g.finish();
}

fn prr(c: &mut Criterion) {
    let pkt = canonical_packet(38).unwrap();
    let cfg = EmulationConfig::with_variant(Variant::Enhanced, QamOrder::Qam64);
    let mut g = c.benchmark_group("prr");
    g.sample_size(10);
    g.bench_function("1000 trials enhanced 64-qam at 15 dB", |b| {
        b.iter(|| estimate_prr(&pkt, &cfg, Some(15.0), 1000, black_box(1)).unwrap())
    });
    g.finish();
}

fn localization(c: &mut Criterion) {
    let anchors: [[f64; 2]; 4] = [[0.0, 0.0], [30.0, 0.0], [30.0, 20.0], [0.0, 20.0]];
    let truth = [12.0, 7.0];
    let d: Vec<f64> = anchors.iter().map(|a| (a[0] - truth[0]).hypot(a[1] - truth[1])).collect();
    c.bench_function("multilaterate 4 anchors", |b| b.iter(|| multilaterate(black_box(&anchors), &d, None).unwrap()));

    let spots: Vec<Spot> = (0..120)
        .map(|i| Spot {
            id: format!("s{i}"),
            position: [(i % 15) as f64, (i / 15) as f64],
            vector: (0..7).map(|b| (format!("b{b}"), -60.0 - ((i * 7 + b * 13) % 30) as f64)).collect(),
        })
        .collect();
    let db = FingerprintDatabase::new(spots, -100.0).unwrap();
    let observed: BTreeMap<String, f64> = (0..7).map(|b| (format!("b{b}"), -70.0 - b as f64)).collect();
    c.bench_function("wknn 120 spots k=3", |b| b.iter(|| wknn_locate(&db, black_box(&observed), 3, 1e-6).unwrap()));
}

criterion_group!(benches, ble, emulation, prr, localization);
criterion_main!(benches);
