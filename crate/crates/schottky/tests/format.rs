use schottky::core::constructions::{
    build_profinitely_dense, family_union_cert, ConstructionConfig, FamilySpec,
};
use schottky::core::exact::{rat, ProjHyperplane, ProjPoint};
use schottky::format::{
    parse_rational, Body, DensityDto, Document, FormatError, FullCertDto, RecordDto, SystemDto,
    SCHEMA_VERSION,
};

fn dense_doc() -> Document {
    let p = ProjPoint::from_i64(&[1, 0, 0]).unwrap();
    let l = ProjHyperplane::from_i64(&[0, 1, 0]).unwrap();
    let b = build_profinitely_dense(
        &p,
        &l,
        &rat(1, 10000),
        &rat(1, 2500),
        &ConstructionConfig::default(),
    )
    .unwrap();
    Document::new(Body::DenseBuild {
        system: SystemDto::from_core(&b.system),
        density: DensityDto::from_core(&b.density),
        records: b.records.iter().map(RecordDto::from_core).collect(),
    })
}

fn assert_round_trip(doc: &Document) {
    let first = doc.to_json();
    let parsed = Document::from_json(&first).unwrap();
    assert_eq!(&parsed, doc);
    assert_eq!(parsed.to_json(), first);
}

#[test]
fn dense_build_round_trips_byte_for_byte() {
    let doc = dense_doc();
    assert_round_trip(&doc);
    let Body::DenseBuild {
        system, records, ..
    } = &doc.body
    else {
        unreachable!()
    };
    let sys = system.to_core().unwrap();
    assert_eq!(SystemDto::from_core(&sys), *system);
    for r in records {
        assert_eq!(RecordDto::from_core(&r.to_core().unwrap()), *r);
    }
}

#[test]
fn certificate_round_trips() {
    let cfg = ConstructionConfig::default();
    let spec = FamilySpec::standard(3, 2, &cfg).unwrap();
    let cert = family_union_cert(&spec, &[true, false], &[false, false], &cfg).unwrap();
    let dto = FullCertDto::from_core(&cert);
    assert_eq!(dto.to_core().unwrap(), cert);
    assert_round_trip(&Document::new(Body::FullGroupCert { cert: dto }));
}

#[test]
fn documents_carry_schema_and_kind_first() {
    let json = dense_doc().to_json();
    let mut lines = json.lines().skip(1);
    assert_eq!(
        lines.next().unwrap().trim(),
        format!("\"schema\": {SCHEMA_VERSION},")
    );
    assert_eq!(lines.next().unwrap().trim(), "\"kind\": \"dense-build\",");
}

#[test]
fn wrong_schema_is_rejected() {
    let json = dense_doc()
        .to_json()
        .replacen("\"schema\": 1", "\"schema\": 99", 1);
    assert!(matches!(
        Document::from_json(&json),
        Err(FormatError::Schema(99))
    ));
}

#[test]
fn numbers_must_be_decimal_strings() {
    let json = dense_doc().to_json();
    let broken = json.replacen("\"m\": \"", "\"m\": \"x", 1);
    assert!(matches!(
        Document::from_json(&broken),
        Err(FormatError::Json(_))
    ));
    let missing = json.replacen("\"kind\": \"dense-build\",", "", 1);
    assert!(Document::from_json(&missing).is_err());
}

#[test]
fn rationals_parse_in_both_forms() {
    assert_eq!(parse_rational("1/100").unwrap(), rat(1, 100));
    assert_eq!(parse_rational("-6/4").unwrap(), rat(-3, 2));
    assert_eq!(parse_rational("5").unwrap(), rat(5, 1));
    assert!(parse_rational("1/0").is_err());
    assert!(parse_rational("a/b").is_err());
}

#[test]
fn zero_vectors_are_malformed() {
    let json = dense_doc().to_json();
    let Body::DenseBuild { system, .. } = Document::from_json(&json).unwrap().body else {
        unreachable!()
    };
    let mut bad = system.clone();
    for x in bad.attracting.balls[0].center.iter_mut() {
        x.0 = 0.into();
    }
    assert!(matches!(bad.to_core(), Err(FormatError::Core(_))));
}
