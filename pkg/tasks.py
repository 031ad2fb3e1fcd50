"""Recurring tasks used to organize the project.

http://www.pyinvoke.org/

"""

from invoke import task, terminals


@task()
def typecheck(c):
    """Check data types."""
    c.run('mypy redlab test', pty=not terminals.WINDOWS)


@task()
def lint(c):
    """Check style and formatting."""
    c.run('ruff check .', pty=not terminals.WINDOWS)
    c.run('ruff format --check .', pty=not terminals.WINDOWS)


@task(default=True)
def test(c, adopt=False):
    """Run unit tests.

    With “adopt”, golden tables are rewritten from current outputs.

    """
    c.run('pytest' + (' --adopt' if adopt else ''), pty=not terminals.WINDOWS)


@task()
def clean(c):
    """Remove artifacts."""
    c.run('rm -rf dist out', warn=True)


@task(pre=[clean])
def build(c):
    """Build for distribution.

    The build process is based on setuptools controlled via the “build”
    package.

    """
    c.run('python -m build', pty=not terminals.WINDOWS)


@task(pre=[build])
def install(c):
    """Build a wheel and forcibly install it for empirical testing."""
    c.run('pip install --force-reinstall dist/*.whl')


@task()
def reproduce(c, out='out'):
    """Regenerate the deterministic tables into a local directory."""
    for cmd in ('table1', 'figure2'):
        c.run(f'redlab {cmd} --out {out}/{cmd}', pty=not terminals.WINDOWS)
