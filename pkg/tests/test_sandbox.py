"""Safety interlocks: consent marker, confinement, whitelist, escrow, caps."""

import os
import stat

import pytest

from ransim import crypto
from ransim.errors import ConsentError, EscrowError, UsageError
from ransim.sandbox import (
    DEFAULT_WHITELIST,
    RunningTotals,
    SandboxConfig,
    check_path_confinement,
    create_sandbox,
    enforce_caps,
    escrow_private_key,
    is_target,
    validate_sandbox,
)


class TestValidateSandbox:
    def test_valid_marker_gives_canonical_config(self, tmp_path):
        cfg = create_sandbox(tmp_path / "lab")
        assert cfg.root == (tmp_path / "lab").resolve()
        assert len(cfg.sandbox_id) == 32
        assert cfg.whitelist == DEFAULT_WHITELIST

    def test_missing_marker_is_consent_error(self, tmp_path):
        (tmp_path / "plain").mkdir()
        with pytest.raises(ConsentError, match="consent marker"):
            validate_sandbox(tmp_path / "plain")

    def test_corrupt_marker_is_consent_error(self, tmp_path):
        d = tmp_path / "lab"
        d.mkdir()
        (d / ".ransim-sandbox").write_text("not-a-hex-id\n")
        with pytest.raises(ConsentError, match="corrupt"):
            validate_sandbox(d)

    def test_nonexistent_root_is_usage_error(self, tmp_path):
        with pytest.raises(UsageError):
            validate_sandbox(tmp_path / "missing")

    def test_file_root_is_usage_error(self, tmp_path):
        f = tmp_path / "afile"
        f.write_text("x")
        with pytest.raises(UsageError, match="not a directory"):
            validate_sandbox(f)

    def test_symlinked_root_resolves_and_marker_checked_at_target(self, tmp_path):
        real = tmp_path / "real"
        create_sandbox(real)
        link = tmp_path / "link"
        link.symlink_to(real)
        cfg = validate_sandbox(link)
        assert cfg.root == real.resolve()

    def test_filesystem_root_refused(self):
        with pytest.raises(ConsentError, match="filesystem root"):
            validate_sandbox("/")

    def test_home_directory_refused(self, tmp_path, monkeypatch):
        home = tmp_path / "homedir"
        home.mkdir()
        (home / ".ransim-sandbox").write_text("ab" * 16 + "\n")
        monkeypatch.setenv("HOME", str(home))
        with pytest.raises(ConsentError, match="home"):
            validate_sandbox(home)

    def test_subdir_of_home_is_allowed(self, tmp_path, monkeypatch):
        home = tmp_path / "homedir"
        lab = home / "lab"
        monkeypatch.setenv("HOME", str(home))
        cfg = create_sandbox(lab)
        assert cfg.root == lab.resolve()

    def test_marker_first_line_is_sandbox_id(self, sandbox):
        first = sandbox.marker_path.read_text().splitlines()[0]
        assert first == sandbox.sandbox_id

    def test_init_is_idempotent(self, sandbox):
        again = create_sandbox(sandbox.root)
        assert again.sandbox_id == sandbox.sandbox_id

    def test_custom_whitelist_normalized(self, sandbox):
        cfg = validate_sandbox(sandbox.root, whitelist=["TXT", ".Md"])
        assert cfg.whitelist == frozenset({".txt", ".md"})

    def test_empty_whitelist_rejected(self, sandbox):
        with pytest.raises(UsageError):
            SandboxConfig(
                root=sandbox.root,
                sandbox_id=sandbox.sandbox_id,
                whitelist=frozenset(),
            )

    def test_nonpositive_caps_rejected(self, sandbox):
        with pytest.raises(UsageError):
            validate_sandbox(sandbox.root, max_files=0)


class TestConfinement:
    def test_file_inside_root(self, sandbox):
        target = sandbox.root / "files" / "a.txt"
        target.parent.mkdir()
        target.write_text("hello")
        assert check_path_confinement(target, sandbox)

    def test_root_itself_is_not_strictly_inside(self, sandbox):
        assert not check_path_confinement(sandbox.root, sandbox)

    def test_dot_dot_escape(self, sandbox):
        assert not check_path_confinement(
            sandbox.root / ".." / "etc" / "passwd", sandbox
        )

    def test_absolute_path_outside(self, sandbox):
        assert not check_path_confinement("/etc/passwd", sandbox)

    def test_symlink_pointing_outside_is_not_confined(self, sandbox, tmp_path):
        outside = tmp_path / "outside.txt"
        outside.write_text("precious")
        link = sandbox.root / "link.txt"
        link.symlink_to(outside)
        assert not check_path_confinement(link, sandbox)

    def test_symlinked_dir_component_outside_is_not_confined(
        self, sandbox, tmp_path
    ):
        outside_dir = tmp_path / "outside_dir"
        outside_dir.mkdir()
        (outside_dir / "b.txt").write_text("x")
        link = sandbox.root / "sub"
        link.symlink_to(outside_dir)
        assert not check_path_confinement(link / "b.txt", sandbox)

    def test_prefix_sibling_name_is_not_confined(self, sandbox):
        # /tmp/.../box-evil must not match /tmp/.../box by string prefix
        sibling = sandbox.root.parent / (sandbox.root.name + "-evil")
        sibling.mkdir()
        assert not check_path_confinement(sibling / "a.txt", sandbox)


class TestIsTarget:
    def test_case_insensitive_extension(self, sandbox):
        assert is_target("notes.TXT", sandbox)
        assert is_target("photo.Jpg", sandbox)

    def test_non_whitelisted_extension(self, sandbox):
        assert not is_target("archive.zip", sandbox)

    def test_already_locked_excluded(self, sandbox):
        assert not is_target("report.txt.locked", sandbox)

    def test_lab_files_never_targets(self, sandbox):
        for name in (".ransim-sandbox", "key.pem", "keys.dat", "events.jsonl"):
            assert not is_target(name, sandbox)

    def test_no_extension(self, sandbox):
        assert not is_target("README", sandbox)


class TestEscrow:
    def test_escrow_then_parse_round_trip(self, sandbox, keypair):
        path = escrow_private_key(keypair, sandbox)
        assert path == sandbox.root / "key.pem"
        parsed = crypto.parse_private_key(path.read_bytes())
        assert (
            parsed.public_key.public_numbers().n
            == keypair.public_key.public_numbers().n
        )

    def test_existing_escrow_file_refused(self, sandbox, keypair):
        escrow_private_key(keypair, sandbox)
        with pytest.raises(EscrowError, match="not overwriting"):
            escrow_private_key(keypair, sandbox)

    def test_unwritable_escrow_dir_is_escrow_error(self, sandbox, keypair,
                                                   monkeypatch):
        # running as root ignores permission bits, so inject the OS error
        def refuse(*args, **kwargs):
            raise PermissionError("read-only filesystem")

        monkeypatch.setattr("ransim.sandbox.atomic_write_bytes", refuse)
        with pytest.raises(EscrowError):
            escrow_private_key(keypair, sandbox)
        assert not (sandbox.root / "key.pem").exists()

    def test_public_only_pair_is_usage_error(self, sandbox, keypair):
        public_only = crypto.KeyPair(public_key=keypair.public_key)
        with pytest.raises(UsageError):
            escrow_private_key(public_only, sandbox)


class TestCaps:
    def test_below_caps_continues(self, sandbox):
        assert enforce_caps(RunningTotals(files=10, bytes=1000), sandbox) is None

    def test_at_cap_continues(self, sandbox):
        totals = RunningTotals(files=sandbox.max_files,
                               bytes=sandbox.max_total_bytes)
        assert enforce_caps(totals, sandbox) is None

    def test_file_count_over_cap_halts(self, sandbox):
        totals = RunningTotals(files=sandbox.max_files + 1, bytes=0)
        assert enforce_caps(totals, sandbox) == "max_files"

    def test_bytes_over_cap_halts(self, sandbox):
        totals = RunningTotals(files=1, bytes=sandbox.max_total_bytes + 1)
        assert enforce_caps(totals, sandbox) == "max_total_bytes"
