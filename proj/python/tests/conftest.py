import os
import sys

# Under ctest the freshly built module in the build tree must win over any
# installed copy, including an editable install's import hook.
_build = os.environ.get("REFCTL_TEST_BUILD_DIR")
if _build:
    sys.path.insert(0, _build)
    sys.meta_path[:] = [f for f in sys.meta_path if not type(f).__module__.startswith("_editable_skbc_refctl")]
    for name in [m for m in sys.modules if m == "refctl" or m.startswith("refctl.")]:
        del sys.modules[name]
