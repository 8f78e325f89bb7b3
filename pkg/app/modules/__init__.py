"""Engine modules for the QPIE circuit engine.

Each subpackage is a self-contained module. To add a command module:

1. Create a new package under ``app/modules/<name>/``.
2. In its ``__init__.py``, expose ``register(subparsers)`` that adds the
   module's subcommands (each with ``common_parser()`` as a parent).
3. Set ``MODULE_META`` with id/name/description and the pydantic config
   model of every command, so ``qpie schema <command>`` can print it.

Library-only packages simply omit ``register``. The loader in
``app.core.registry`` auto-discovers every subpackage; no changes to
``main.py`` are required.
"""
