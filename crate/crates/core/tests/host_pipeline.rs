use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use mobilehost::demo::{notes_descriptor, NotesHandler, NOTES_PATH};
use mobilehost::host::{
    build_call, encrypt_envelope, init_host, sign_envelope, verify_envelope, AuthHeader, Host, HostConfig, HostError,
    Verdict,
};
use mobilehost::registry::{Outcome, RegistryError, UserRecord, CHECKSUMS_FILE, SERVICES_FILE};
use mobilehost::security::{issue_certificate, KeyPair};
use mobilehost::service::{HandlerError, MethodSignature, ParameterSpec, ServiceDescriptor, ServiceHandler};
use mobilehost::soap::{parse_envelope, serialize_envelope, Body, FaultCode, Param, QName, SoapEnvelope, TypedValue, XsdType};
use mobilehost::transport::{InboundRequest, OutboundResponse, TransportKind};

fn calc_descriptor(name: &str, secure: bool) -> ServiceDescriptor {
    ServiceDescriptor {
        service_name: name.into(),
        namespace_uri: format!("urn:{name}"),
        endpoint_path: format!("/{name}"),
        response_namespace_uri: format!("urn:{name}:out"),
        methods: vec![MethodSignature::new(
            "add",
            vec![ParameterSpec::new("a", XsdType::Int), ParameterSpec::new("b", XsdType::Int)],
            XsdType::Int,
        )],
        security_enabled: secure,
        exclusive_execution: false,
    }
}

fn calc() -> Arc<dyn ServiceHandler> {
    Arc::new(|_: &str, args: &[TypedValue]| match args {
        [TypedValue::Int(a), TypedValue::Int(b)] => {
            a.checked_add(*b).map(TypedValue::Int).ok_or_else(|| HandlerError::new("overflow"))
        }
        _ => Err(HandlerError::new("bad arguments")),
    })
}

fn add_call(service: &str, a: i32, b: i32) -> SoapEnvelope {
    build_call(
        QName::new("add", format!("urn:{service}")).unwrap(),
        vec![Param::new("a", TypedValue::Int(a)), Param::new("b", TypedValue::Int(b))],
    )
}

fn post(path: &str, body: Vec<u8>) -> InboundRequest {
    let headers = [("content-type".to_string(), "text/xml".to_string())].into_iter().collect();
    InboundRequest::new(TransportKind::Http, "test", Some("POST".into()), path, None, headers, body)
}

fn send(host: &Host, path: &str, env: &SoapEnvelope) -> (OutboundResponse, SoapEnvelope) {
    let resp = host.handle_request(post(path, serialize_envelope(env)));
    let parsed = parse_envelope(&resp.body).unwrap();
    (resp, parsed)
}

fn result(env: &SoapEnvelope) -> &TypedValue {
    match &env.body {
        Body::Response(r) => &r.result,
        other => panic!("expected a response, got {other:?}"),
    }
}

fn fault_code(env: &SoapEnvelope) -> FaultCode {
    env.fault().unwrap_or_else(|| panic!("expected a fault, got {env:?}")).code
}

fn host_at(dir: &Path) -> Host {
    init_host(HostConfig::new(dir)).unwrap()
}

#[test]
fn fault_attribution_over_the_error_taxonomy() {
    let dir = tempfile::tempdir().unwrap();
    let host = host_at(dir.path());
    host.create_service(calc_descriptor("Calc", false), calc()).unwrap();
    let ns = "urn:Calc";
    let int = |n: &str, v| Param::new(n, TypedValue::Int(v));
    let cases: Vec<(&str, SoapEnvelope, FaultCode)> = vec![
        ("unknown method", build_call(QName::new("sub", ns).unwrap(), vec![int("a", 1), int("b", 2)]), FaultCode::Client),
        ("arity-1", build_call(QName::new("add", ns).unwrap(), vec![int("a", 1)]), FaultCode::Client),
        ("arity+1", build_call(QName::new("add", ns).unwrap(), vec![int("a", 1), int("b", 2), int("c", 3)]), FaultCode::Client),
        (
            "wrong type",
            build_call(QName::new("add", ns).unwrap(), vec![int("a", 1), Param::new("b", TypedValue::string("2"))]),
            FaultCode::Client,
        ),
        ("wrong name", build_call(QName::new("add", ns).unwrap(), vec![int("a", 1), int("x", 2)]), FaultCode::Client),
        ("handler error", add_call("Calc", i32::MAX, 1), FaultCode::Server),
    ];
    for (label, env, code) in &cases {
        let (resp, parsed) = send(&host, "/Calc", env);
        assert_eq!(resp.status, 500, "{label}");
        assert_eq!(fault_code(&parsed), *code, "{label}");
    }
    let (resp, parsed) = send(&host, "/Calc", &add_call("Calc", 2, 3));
    assert_eq!(resp.status, 200);
    assert_eq!(result(&parsed), &TypedValue::Int(5));
    let log = host.registry().log().entries();
    assert_eq!(log.len(), cases.len() + 1);
    assert_eq!(log.iter().filter(|e| e.outcome == Outcome::ClientFault).count(), 5);
    assert_eq!(log.iter().filter(|e| e.outcome == Outcome::ServerFault).count(), 1);
}

#[test]
fn access_control() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = HostConfig::new(dir.path());
    cfg.auth_required = true;
    let host = init_host(cfg).unwrap();
    host.create_service(calc_descriptor("Calc", false), calc()).unwrap();
    host.registry().add_user(UserRecord::new("ana", "s3cret", "phone-1", ["Calc"])).unwrap();
    host.registry().add_user(UserRecord::new("bob", "pw", "phone-2", ["Other"])).unwrap();

    let with_auth = |login: &str, pw: &str| {
        let mut env = add_call("Calc", 1, 1);
        env.headers.push(AuthHeader::new(login, pw, "dev").to_entry());
        env
    };
    let denied = |env: &SoapEnvelope| {
        let (_, parsed) = send(&host, "/Calc", env);
        let f = parsed.fault().cloned().expect("fault");
        f.code == FaultCode::Client && f.message == "access denied"
    };
    assert!(denied(&add_call("Calc", 1, 1)));
    assert!(denied(&with_auth("ana", "wrong")));
    assert!(denied(&with_auth("bob", "pw")));
    assert!(denied(&with_auth("nobody", "pw")));
    let (_, ok) = send(&host, "/Calc", &with_auth("ana", "s3cret"));
    assert_eq!(result(&ok), &TypedValue::Int(2));
    let outcomes: Vec<Outcome> = host.registry().log().entries().iter().map(|e| e.outcome).collect();
    assert_eq!(outcomes, [Outcome::Denied, Outcome::Denied, Outcome::Denied, Outcome::Denied, Outcome::Ok]);
}

#[test]
fn secure_services_sign_every_response_and_accept_encrypted_signed_calls() {
    let dir = tempfile::tempdir().unwrap();
    let host = host_at(dir.path());
    host.create_service(calc_descriptor("Safe", true), calc()).unwrap();
    host.create_service(calc_descriptor("Open", false), calc()).unwrap();
    let cert = host.certificate("Safe").unwrap();
    assert!(cert.verify_self_signature());
    assert_eq!(cert.validity_days(), 10);
    assert!(host.certificate("Open").is_err());

    let (resp, _) = send(&host, "/Safe", &add_call("Safe", 2, 2));
    assert_eq!(verify_envelope(&resp.body, &cert), Verdict::Valid);
    let (resp, parsed) = send(&host, "/Safe", &add_call("Safe", i32::MAX, 1));
    assert_eq!(fault_code(&parsed), FaultCode::Server);
    assert_eq!(verify_envelope(&resp.body, &cert), Verdict::Valid);
    let (resp, _) = send(&host, "/Open", &add_call("Open", 2, 2));
    assert_eq!(verify_envelope(&resp.body, &cert), Verdict::Unsigned);

    let mut tampered = host.handle_request(post("/Safe", serialize_envelope(&add_call("Safe", 2, 2)))).body;
    let at = String::from_utf8_lossy(&tampered).find(">4<").unwrap() + 1;
    tampered[at] = b'5';
    assert_eq!(verify_envelope(&tampered, &cert), Verdict::Invalid);

    // Consumer signs with its own key, then encrypts toward the service.
    let consumer = KeyPair::generate(2048).unwrap();
    let consumer_cert = issue_certificate(&consumer, "phone/", 10);
    let mut inner = add_call("Safe", 20, 22);
    sign_envelope(&mut inner, &consumer, Some(&consumer_cert));
    let outer = encrypt_envelope(&inner, &cert, "/Safe").unwrap();
    let wire = serialize_envelope(&outer);
    assert!(!String::from_utf8_lossy(&wire).contains("<a "));
    let resp = host.handle_request(InboundRequest::raw(TransportKind::RawTcp, "t", "", wire.clone()));
    assert_eq!(result(&parse_envelope(&resp.body).unwrap()), &TypedValue::Int(42));

    // Damaged ciphertext and forged inner signatures are client errors.
    let broken = String::from_utf8(wire).unwrap().replacen("<mh:CipherText>", "<mh:CipherText>AAAA", 1);
    let (_, parsed) = send(&host, "/Safe", &parse_envelope(broken.as_bytes()).unwrap());
    assert_eq!(fault_code(&parsed), FaultCode::Client);
    let mut forged = add_call("Safe", 1, 1);
    sign_envelope(&mut forged, &consumer, Some(&consumer_cert));
    if let Body::Call(c) = &mut forged.body {
        c.params[0].value = TypedValue::Int(100);
    }
    let (_, parsed) = send(&host, "/Safe", &forged);
    assert_eq!(parsed.fault().unwrap().message, "signature verification failed");
    let (_, parsed) = send(&host, "/Open", &encrypt_envelope(&add_call("Open", 1, 1), &cert, "/Open").unwrap());
    assert_eq!(fault_code(&parsed), FaultCode::Client);
}

#[test]
fn restart_restores_registry_and_keys() {
    let dir = tempfile::tempdir().unwrap();
    let (cert, before) = {
        let host = host_at(dir.path());
        host.create_service(notes_descriptor(), Arc::new(NotesHandler::with_default_seed())).unwrap();
        host.create_service(calc_descriptor("A", false), calc()).unwrap();
        host.create_service(calc_descriptor("B", true), calc()).unwrap();
        host.registry().add_user(UserRecord::new("u1", "sentinel-pass-991", "d1", ["A"])).unwrap();
        host.registry().add_user(UserRecord::new("u2", "sentinel-pass-991", "d2", ["*"])).unwrap();
        host.shutdown().unwrap();
        host.shutdown().unwrap();
        (host.certificate("B").unwrap(), host.registry().services())
    };
    for f in fs::read_dir(dir.path()).unwrap() {
        let p = f.unwrap().path();
        if p.is_file() {
            assert!(!fs::read_to_string(&p).unwrap().contains("sentinel-pass-991"), "{}", p.display());
        }
    }

    let host = host_at(dir.path());
    let after = host.registry().services();
    assert_eq!(after.len(), 3);
    assert!(before.iter().zip(&after).all(|(a, b)| a == b));
    assert_eq!(host.registry().users().len(), 2);
    assert_eq!(host.certificate("B").unwrap(), cert);

    // Routes exist; handlers come back when the services are declared again.
    let (_, parsed) = send(&host, "/A", &add_call("A", 1, 2));
    assert_eq!(fault_code(&parsed), FaultCode::Server);
    host.create_service(calc_descriptor("A", false), calc()).unwrap();
    host.create_service(calc_descriptor("B", true), calc()).unwrap();
    let (_, parsed) = send(&host, "/A", &add_call("A", 1, 2));
    assert_eq!(result(&parsed), &TypedValue::Int(3));
    let (resp, _) = send(&host, "/B", &add_call("B", 1, 2));
    assert_eq!(verify_envelope(&resp.body, &cert), Verdict::Valid);
}

#[test]
fn corrupt_snapshot_blocks_startup() {
    let dir = tempfile::tempdir().unwrap();
    {
        let host = host_at(dir.path());
        host.create_service(calc_descriptor("A", false), calc()).unwrap();
        host.shutdown().unwrap();
    }
    let path = dir.path().join(SERVICES_FILE);
    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 10);
    fs::write(&path, bytes).unwrap();
    assert!(matches!(
        init_host(HostConfig::new(dir.path())),
        Err(HostError::Registry(RegistryError::CorruptSnapshot(_)))
    ));
    fs::remove_file(dir.path().join(CHECKSUMS_FILE)).unwrap();
    assert!(init_host(HostConfig::new(dir.path())).is_err());
}

#[test]
fn exclusive_services_run_one_call_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let host = Arc::new(host_at(dir.path()));
    let mut desc = calc_descriptor("Serial", false);
    desc.exclusive_execution = true;
    let active = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (a, p) = (active.clone(), peak.clone());
    host.create_service(
        desc,
        Arc::new(move |_: &str, _: &[TypedValue]| {
            let now = a.fetch_add(1, Ordering::SeqCst) + 1;
            p.fetch_max(now, Ordering::SeqCst);
            thread::sleep(Duration::from_millis(5));
            a.fetch_sub(1, Ordering::SeqCst);
            Ok(TypedValue::Int(0))
        }),
    )
    .unwrap();
    let threads: Vec<_> = (0..8)
        .map(|_| {
            let host = host.clone();
            thread::spawn(move || {
                for _ in 0..5 {
                    let (_, env) = send(&host, "/Serial", &add_call("Serial", 1, 1));
                    assert_eq!(result(&env), &TypedValue::Int(0));
                }
            })
        })
        .collect();
    for t in threads {
        t.join().unwrap();
    }
    assert_eq!(peak.load(Ordering::SeqCst), 1);
}

#[test]
fn path_conflicts_and_namespace_routing() {
    let dir = tempfile::tempdir().unwrap();
    let host = host_at(dir.path());
    host.create_service(notes_descriptor(), Arc::new(NotesHandler::with_default_seed())).unwrap();
    let mut clash = calc_descriptor("Clash", false);
    clash.endpoint_path = NOTES_PATH.into();
    assert!(matches!(host.create_service(clash, calc()), Err(HostError::Registry(RegistryError::PathConflict(_)))));

    let call = build_call(
        QName::new("obterNotas", "http://localhost:5000/CadastroEscolar.jws").unwrap(),
        vec![Param::new("codAluno", TypedValue::string("ZZZ")), Param::new("codDisciplina", TypedValue::string("D002"))],
    );
    let resp = host.handle_request(InboundRequest::raw(TransportKind::RawTcp, "t", "", serialize_envelope(&call)));
    assert_eq!(result(&parse_envelope(&resp.body).unwrap()), &TypedValue::string("#"));
    let junk = host.handle_request(InboundRequest::raw(TransportKind::RawTcp, "t", "", b"hello".to_vec()));
    assert_eq!(parse_envelope(&junk.body).unwrap().fault().unwrap().code, FaultCode::Client);
    assert!(host.registry().log().entries().len() == 1);
}
