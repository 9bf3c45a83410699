use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use mobilehost::demo::{notes_descriptor, NotesHandler};
use mobilehost::host::{
    build_call, encrypt_envelope, init_host, sign_envelope, verify_envelope, AuthHeader, HostConfig, Verdict,
};
use mobilehost::registry::{Registry, RegistryError, UserRecord, DEFAULT_LOG_CAPACITY};
use mobilehost::security::{
    issue_certificate, parse_certificate_text, render_certificate_text, Certificate, KeyPair, KeyStore,
    SecurityError, DEFAULT_KEY_BITS, DEFAULT_VALIDITY_DAYS,
};
use mobilehost::service::ServiceDescriptor;
use mobilehost::soap::{parse_envelope, serialize_envelope, Body, Param, QName, TypedValue};
use mobilehost::transport::{exchange, http_get, BindingConfig, DEFAULT_WORKERS};
use mobilehost::wsdl::parse_wsdl;

const EXIT_FAULT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "mobilehost", version, about = "Run and call a small SOAP service host")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the host until interrupted.
    Serve(ServeArgs),
    /// Call a remote method and print its result.
    Invoke(InvokeArgs),
    /// Print the WSDL of a service.
    Describe {
        /// Service endpoint URL.
        url: String,
    },
    /// Generate a keypair and self-signed certificate.
    Keygen {
        name: String,
        #[arg(long, default_value = "mobilehost-data")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_KEY_BITS)]
        bits: usize,
        #[arg(long, default_value_t = DEFAULT_VALIDITY_DAYS)]
        days: u32,
        /// Replace an existing key set.
        #[arg(long)]
        force: bool,
    },
    /// Certificate operations.
    Cert {
        #[command(subcommand)]
        command: CertCommand,
    },
    /// User database operations.
    Users {
        #[command(subcommand)]
        command: UsersCommand,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Listener address, e.g. http://0.0.0.0:5000 or tcp://0.0.0.0:5001. Repeatable.
    #[arg(long = "bind", default_value = "http://127.0.0.1:5000")]
    bindings: Vec<String>,
    #[arg(long, default_value = "mobilehost-data")]
    data_dir: PathBuf,
    /// Defaults to `<data-dir>/wsdl`.
    #[arg(long)]
    wsdl_dir: Option<PathBuf>,
    /// Directory of static files for plain web requests.
    #[arg(long)]
    web_root: Option<PathBuf>,
    /// Require an `Auth` header on every SOAP request.
    #[arg(long)]
    auth_required: bool,
    #[arg(long, default_value_t = DEFAULT_WORKERS)]
    workers: usize,
    /// Base URL written into WSDL documents. Defaults to the first HTTP binding.
    #[arg(long)]
    advertised_url: Option<String>,
    /// Register the school notes demo service.
    #[arg(long)]
    demo_notes: bool,
    /// Enable signatures and encryption on the demo service.
    #[arg(long, requires = "demo_notes")]
    demo_secure: bool,
    /// Seed file for the demo (`student;discipline;label;value` lines).
    #[arg(long, requires = "demo_notes")]
    notes_seed: Option<PathBuf>,
}

#[derive(Args)]
struct InvokeArgs {
    /// Service endpoint URL (http://, tcp:// or loopback://).
    url: String,
    method: String,
    /// Positional parameter values, typed from the service WSDL.
    params: Vec<String>,
    /// WSDL file to type parameters with instead of fetching `<url>?wsdl`.
    #[arg(long)]
    wsdl: Option<PathBuf>,
    /// Service certificate: encrypts with `--encrypt` and verifies responses.
    #[arg(long)]
    cert: Option<PathBuf>,
    #[arg(long, requires = "cert")]
    encrypt: bool,
    /// Sign the request with this key set from `<data-dir>/keys`.
    #[arg(long)]
    sign: Option<String>,
    #[arg(long, default_value = "mobilehost-data")]
    data_dir: PathBuf,
    #[arg(long, requires = "password")]
    login: Option<String>,
    #[arg(long, requires = "login")]
    password: Option<String>,
    #[arg(long, default_value = "cli")]
    device: String,
}

#[derive(Subcommand)]
enum CertCommand {
    /// Print a certificate listing.
    Show {
        /// Key set name in `<data-dir>/keys`.
        name: Option<String>,
        #[arg(long, default_value = "mobilehost-data")]
        data_dir: PathBuf,
        /// Read the certificate from a file instead.
        #[arg(long, conflicts_with = "name")]
        file: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum UsersCommand {
    /// Add a consumer account.
    Add {
        login: String,
        #[arg(long)]
        password: String,
        #[arg(long, default_value = "")]
        device: String,
        /// Comma-separated service names; `*` grants all.
        #[arg(long, value_delimiter = ',', default_value = "*")]
        services: Vec<String>,
        #[arg(long, default_value = "mobilehost-data")]
        data_dir: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl std::fmt::Display) -> Failure {
    Failure { code, message: message.to_string() }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(a) => serve(a),
        Command::Invoke(a) => invoke(a),
        Command::Describe { url } => describe(&url),
        Command::Keygen { name, data_dir, bits, days, force } => keygen(&name, &data_dir, bits, days, force),
        Command::Cert { command: CertCommand::Show { name, data_dir, file } } => cert_show(name, &data_dir, file),
        Command::Users { command: UsersCommand::Add { login, password, device, services, data_dir } } => {
            users_add(&login, &password, &device, services, &data_dir)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn serve(a: ServeArgs) -> CmdResult {
    let bindings = a
        .bindings
        .iter()
        .map(|b| b.parse::<BindingConfig>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| fail(EXIT_USAGE, e))?;
    let mut cfg = HostConfig::new(&a.data_dir);
    if let Some(w) = a.wsdl_dir {
        cfg.wsdl_dir = w;
    }
    cfg.web_root = a.web_root;
    cfg.auth_required = a.auth_required;
    cfg.worker_pool_size = a.workers;
    cfg.advertised_url = match a.advertised_url {
        Some(u) => u,
        None => bindings
            .iter()
            .find(|b| b.kind == mobilehost::transport::TransportKind::Http)
            .map(|b| {
                let host = if b.address == "0.0.0.0" || b.address == "::" { "localhost" } else { &b.address };
                format!("http://{host}:{}", b.port)
            })
            .unwrap_or_else(|| mobilehost::host::DEFAULT_ADVERTISED_URL.to_string()),
    };
    cfg.bindings = bindings;

    let host = init_host(cfg).map_err(|e| fail(EXIT_IO, e))?;
    if a.demo_notes {
        let handler = match &a.notes_seed {
            Some(p) => NotesHandler::from_seed_file(p).map_err(|e| fail(EXIT_IO, format!("{}: {e}", p.display())))?,
            None => NotesHandler::with_default_seed(),
        };
        let mut desc = notes_descriptor();
        desc.security_enabled = a.demo_secure;
        host.create_service(desc, Arc::new(handler)).map_err(|e| fail(EXIT_IO, e))?;
    }

    let (tx, rx) = mpsc::channel();
    ctrlc::set_handler(move || {
        let _ = tx.send(());
    })
    .map_err(|e| fail(EXIT_IO, e))?;

    let bound = host.start().map_err(|e| fail(EXIT_IO, e))?;
    for b in &bound {
        println!("listening on {b}");
    }
    for rec in host.registry().services() {
        println!("service {} at {}", rec.name(), rec.descriptor.endpoint_path);
    }
    let _ = std::io::stdout().flush();

    let _ = rx.recv();
    host.shutdown().map_err(|e| fail(EXIT_IO, e))?;
    println!("stopped");
    Ok(())
}

fn with_query(url: &str, query: &str) -> String {
    let base = url.split('?').next().unwrap_or(url);
    format!("{base}?{query}")
}

fn fetch_wsdl(url: &str) -> Result<String, Failure> {
    let resp = http_get(&with_query(url, "wsdl")).map_err(|e| fail(EXIT_IO, e))?;
    if resp.status != 200 {
        return Err(fail(EXIT_FAULT, format!("no WSDL at {url} (HTTP {})", resp.status)));
    }
    String::from_utf8(resp.body).map_err(|_| fail(EXIT_FAULT, "WSDL is not UTF-8"))
}

fn describe(url: &str) -> CmdResult {
    print!("{}", fetch_wsdl(url)?);
    Ok(())
}

fn load_descriptor(a: &InvokeArgs) -> Result<ServiceDescriptor, Failure> {
    let text = match &a.wsdl {
        Some(p) => std::fs::read_to_string(p).map_err(|e| fail(EXIT_IO, format!("{}: {e}", p.display())))?,
        None if a.url.starts_with("http://") => fetch_wsdl(&a.url)?,
        None => return Err(fail(EXIT_USAGE, "--wsdl is required for non-HTTP endpoints")),
    };
    parse_wsdl(text.as_bytes()).map_err(|e| fail(EXIT_FAULT, e))
}

fn read_cert(path: &Path) -> Result<Certificate, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))?;
    parse_certificate_text(&text).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn invoke(a: InvokeArgs) -> CmdResult {
    let desc = load_descriptor(&a)?;
    let sig = desc
        .method(&a.method)
        .ok_or_else(|| fail(EXIT_USAGE, format!("`{}` is not a method of {}", a.method, desc.service_name)))?;
    // Extra or missing arguments are sent as given; the service judges them.
    let params = a
        .params
        .iter()
        .enumerate()
        .map(|(i, raw)| match sig.params.get(i) {
            Some(spec) => TypedValue::parse(spec.xsd_type, raw)
                .map(|v| Param::new(spec.name.clone(), v))
                .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", spec.name))),
            None => Ok(Param::new(format!("arg{i}"), TypedValue::string(raw.clone()))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let op = QName::new(a.method.clone(), desc.namespace_uri.clone()).map_err(|e| fail(EXIT_USAGE, e))?;
    let mut env = build_call(op, params);

    if let (Some(login), Some(password)) = (&a.login, &a.password) {
        env.headers.push(AuthHeader::new(login, password, &a.device).to_entry());
    }
    if let Some(name) = &a.sign {
        let store = KeyStore::open(a.data_dir.join("keys")).map_err(|e| fail(EXIT_IO, e))?;
        let (kp, cert) = store.load(name).map_err(|e| fail(EXIT_IO, e))?;
        sign_envelope(&mut env, &kp, Some(&cert));
    }
    let cert = a.cert.as_deref().map(read_cert).transpose()?;
    if a.encrypt {
        let cert = cert.as_ref().expect("clap enforces --cert with --encrypt");
        env = encrypt_envelope(&env, cert, &desc.endpoint_path).map_err(|e| fail(EXIT_USAGE, e))?;
    }

    let reply = exchange(&a.url, &serialize_envelope(&env)).map_err(|e| fail(EXIT_IO, e))?;
    let verdict = cert.as_ref().map(|c| verify_envelope(&reply.body, c));
    if let Some(v) = verdict {
        println!("signature: {}", v.as_str());
    }
    let parsed = parse_envelope(&reply.body).map_err(|e| fail(EXIT_FAULT, format!("unreadable response: {e}")))?;
    match parsed.body {
        Body::Response(r) => println!("{}", r.result.lexical()),
        Body::Fault(f) => return Err(fail(EXIT_FAULT, format!("fault {}: {}", f.code, f.message))),
        Body::Call(_) => return Err(fail(EXIT_FAULT, "response body is a call")),
    }
    if verdict == Some(Verdict::Invalid) {
        return Err(fail(EXIT_FAULT, "response signature did not verify"));
    }
    Ok(())
}

fn keygen(name: &str, data_dir: &Path, bits: usize, days: u32, force: bool) -> CmdResult {
    if days == 0 {
        return Err(fail(EXIT_USAGE, "--days must be at least 1"));
    }
    let store = KeyStore::open(data_dir.join("keys")).map_err(|e| fail(EXIT_IO, e))?;
    if store.contains(name) && !force {
        return Err(fail(EXIT_USAGE, format!("key set `{name}` exists; use --force to replace it")));
    }
    let kp = KeyPair::generate(bits).map_err(|e| fail(EXIT_USAGE, e))?;
    let cert = issue_certificate(&kp, &format!("{name}/"), days);
    store.save(name, &kp, &cert, force).map_err(|e| match e {
        SecurityError::KeyExists(_) | SecurityError::KeyStore(_) => fail(EXIT_USAGE, e),
        other => fail(EXIT_IO, other),
    })?;
    println!("wrote {}", store.key_path(name).display());
    println!("wrote {}", store.cert_path(name).display());
    Ok(())
}

fn cert_show(name: Option<String>, data_dir: &Path, file: Option<PathBuf>) -> CmdResult {
    let cert = match (name, file) {
        (_, Some(f)) => read_cert(&f)?,
        (Some(n), None) => KeyStore::open(data_dir.join("keys"))
            .and_then(|s| s.load_certificate(&n))
            .map_err(|e| fail(EXIT_IO, format!("certificate `{n}`: {e}")))?,
        (None, None) => return Err(fail(EXIT_USAGE, "give a key set name or --file")),
    };
    print!("{}", render_certificate_text(&cert));
    Ok(())
}

fn users_add(login: &str, password: &str, device: &str, services: Vec<String>, data_dir: &Path) -> CmdResult {
    let registry = Registry::load_snapshot(data_dir, DEFAULT_LOG_CAPACITY).map_err(|e| fail(EXIT_IO, e))?;
    registry
        .add_user(UserRecord::new(login, password, device, services))
        .map_err(|e| match e {
            RegistryError::DuplicateUser(_) | RegistryError::InvalidRecord(_) => fail(EXIT_USAGE, e),
            other => fail(EXIT_IO, other),
        })?;
    registry.snapshot(data_dir).map_err(|e| fail(EXIT_IO, e))?;
    println!("added user {login}");
    Ok(())
}
