//! `gatectl`: provisioning of the credentials file.
//!
//! ```text
//! gatectl init --file <path>
//! gatectl user add <name> [<password> | --stdin] --file <path>
//! gatectl user remove <name> --file <path>
//! gatectl user list --file <path>
//! gatectl hash <password>
//! ```
//!
//! Exit codes: 0 success, 1 domain error (bad usage, duplicate or unknown
//! user, existing file), 2 I/O error.

use std::ffi::{OsStr, OsString};
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use portal_guard_core::md5_hex;

use crate::credential_store::{Backing, CredentialStore, CredentialStoreError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_IO: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "gatectl", version, about = "Manage portal guard credentials")]
pub struct Gatectl {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty credentials file.
    Init {
        #[arg(long)]
        file: PathBuf,
    },
    /// Manage user accounts.
    User {
        #[command(subcommand)]
        action: UserCommand,
    },
    /// Print the MD5 digest of a password.
    Hash {
        #[arg(allow_hyphen_values = true)]
        password: OsString,
    },
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Add an account. Without a password argument or --stdin, prompts for it.
    Add {
        name: String,
        #[arg(allow_hyphen_values = true, conflicts_with = "stdin")]
        password: Option<OsString>,
        /// Read the password as one line from standard input.
        #[arg(long)]
        stdin: bool,
        #[arg(long)]
        file: PathBuf,
    },
    /// Remove an account.
    Remove {
        name: String,
        #[arg(long)]
        file: PathBuf,
    },
    /// List account names, sorted.
    List {
        #[arg(long)]
        file: PathBuf,
    },
}

/// Process handles, injectable for tests.
pub struct Console<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
    /// Reads a password without echo.
    pub prompt: &'a mut dyn FnMut(&str) -> io::Result<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, console: &mut Console<'_>) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Gatectl::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let informational = matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            );
            let out: &mut dyn Write = if informational {
                &mut *console.stdout
            } else {
                &mut *console.stderr
            };
            let _ = write!(out, "{}", err.render());
            return if informational { EXIT_OK } else { EXIT_DOMAIN };
        }
    };
    match execute(cli.command, console) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let _ = writeln!(console.stderr, "gatectl: {}", failure.message);
            failure.code
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<CredentialStoreError> for Failure {
    fn from(err: CredentialStoreError) -> Self {
        Failure {
            code: if err.is_domain_error() {
                EXIT_DOMAIN
            } else {
                EXIT_IO
            },
            message: err.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(err: io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: err.to_string(),
        }
    }
}

fn execute(command: Command, console: &mut Console<'_>) -> Result<(), Failure> {
    match command {
        Command::Init { file } => {
            CredentialStore::init(Backing::File(file.clone()))?;
            writeln!(console.stdout, "initialized {}", file.display())?;
        }
        Command::Hash { password } => {
            writeln!(console.stdout, "{}", md5_hex(&os_bytes(&password)))?;
        }
        Command::User { action } => match action {
            UserCommand::Add {
                name,
                password,
                stdin,
                file,
            } => {
                let password = match (password, stdin) {
                    (Some(password), _) => os_bytes(&password),
                    (None, true) => read_password_line(console.stdin)?,
                    (None, false) => (console.prompt)("Password: ")?.into_bytes(),
                };
                let store = CredentialStore::open(&file)?;
                store.add_user(&name, &password)?;
                writeln!(console.stdout, "added user {name}")?;
            }
            UserCommand::Remove { name, file } => {
                CredentialStore::open(&file)?.remove_user(&name)?;
                writeln!(console.stdout, "removed user {name}")?;
            }
            UserCommand::List { file } => {
                for name in CredentialStore::open(&file)?.list_users() {
                    writeln!(console.stdout, "{name}")?;
                }
            }
        },
    }
    Ok(())
}

/// One line of input with exactly one trailing `\n` removed.
fn read_password_line(input: &mut dyn BufRead) -> io::Result<Vec<u8>> {
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line)?;
    if line.last() == Some(&b'\n') {
        line.pop();
    }
    Ok(line)
}

#[cfg(unix)]
fn os_bytes(value: &OsStr) -> Vec<u8> {
    use std::os::unix::ffi::OsStrExt;
    value.as_bytes().to_vec()
}

#[cfg(not(unix))]
fn os_bytes(value: &OsStr) -> Vec<u8> {
    value.to_string_lossy().into_owned().into_bytes()
}
