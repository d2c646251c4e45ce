# Loadable modules (structure, certification, workflow_automation).
# Subpackages: structure/, certification/, workflow_automation/
# See docs/README_CLI.md for the module contract.
