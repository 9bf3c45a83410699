use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rsa::pkcs8::{DecodePrivateKey, EncodePrivateKey, LineEnding};
use rsa::RsaPrivateKey;

use super::{parse_certificate_text, render_certificate_text, Certificate, KeyPair, SecurityError};

/// Directory of `<name>.key` (PKCS#8 PEM, owner-only) and `<name>.cert`
/// (certificate listing) files.
#[derive(Debug, Clone)]
pub struct KeyStore {
    dir: PathBuf,
}

impl KeyStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SecurityError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(KeyStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key_path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.key"))
    }

    pub fn cert_path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.cert"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.key_path(name).exists()
    }

    pub fn save(&self, name: &str, kp: &KeyPair, cert: &Certificate, overwrite: bool) -> Result<(), SecurityError> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(SecurityError::KeyStore(format!("invalid key name `{name}`")));
        }
        if !overwrite && self.contains(name) {
            return Err(SecurityError::KeyExists(name.to_string()));
        }
        let pem = kp
            .private()
            .to_pkcs8_pem(LineEnding::LF)
            .map_err(|e| SecurityError::KeyStore(e.to_string()))?;
        write_private(&self.key_path(name), pem.as_bytes())?;
        fs::write(self.cert_path(name), render_certificate_text(cert))?;
        Ok(())
    }

    pub fn load(&self, name: &str) -> Result<(KeyPair, Certificate), SecurityError> {
        let pem = fs::read_to_string(self.key_path(name))?;
        let private = RsaPrivateKey::from_pkcs8_pem(&pem).map_err(|e| SecurityError::KeyStore(e.to_string()))?;
        let cert = self.load_certificate(name)?;
        let kp = KeyPair::from_private(private);
        if cert.public_key != *kp.public_key() {
            return Err(SecurityError::KeyStore(format!("certificate for `{name}` does not match its key")));
        }
        Ok((kp, cert))
    }

    pub fn load_certificate(&self, name: &str) -> Result<Certificate, SecurityError> {
        parse_certificate_text(&fs::read_to_string(self.cert_path(name))?)
    }
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::os::unix::fs::{OpenOptionsExt, PermissionsExt};
    let mut f = fs::OpenOptions::new().write(true).create(true).truncate(true).mode(0o600).open(path)?;
    f.set_permissions(fs::Permissions::from_mode(0o600))?;
    f.write_all(bytes)
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    fs::File::create(path)?.write_all(bytes)
}
