"""
REST API tests

Tests cover:
- Knox login and logout
- Running scenarios through the API and listing recorded runs
- Case validation
- Authentication and ownership rules
"""
from django.urls import reverse
from rest_framework import status

from gridflow.models import SimulationRun
from .base import BaseAPITestCase, scenario_document, three_bus_document


class AuthenticationTestCase(BaseAPITestCase):
    """Test suite for authentication endpoints"""

    def test_login_success(self):
        response = self.client.post(reverse('login'), {'username': 'testuser', 'password': 'TestPass123!'},
                                    format='json')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertIn('token', response.data)
        self.assertEqual(response.data['user']['username'], 'testuser')

    def test_login_missing_fields(self):
        response = self.client.post(reverse('login'), {'username': 'testuser'}, format='json')
        self.assertValidationError(response, 'required')

    def test_login_invalid_credentials(self):
        response = self.client.post(reverse('login'), {'username': 'testuser', 'password': 'wrong'}, format='json')
        self.assertUnauthorized(response)

    def test_logout(self):
        client, _ = self.get_authenticated_client()
        response = client.post(reverse('logout'))
        self.assertEqual(response.status_code, status.HTTP_204_NO_CONTENT)
        self.assertUnauthorized(client.get(reverse('simulationrun-list')))


class SimulationRunAPITestCase(BaseAPITestCase):
    """Test suite for the simulation run endpoints"""

    def setUp(self):
        super().setUp()
        self.auth_client, _ = self.get_authenticated_client()
        self.list_url = reverse('simulationrun-list')

    def test_requires_authentication(self):
        self.assertUnauthorized(self.client.get(self.list_url))
        self.assertUnauthorized(self.client.post(self.list_url, scenario_document(), format='json'))

    def test_create_run(self):
        response = self.auth_client.post(self.list_url, scenario_document(), format='json')
        self.assertEqual(response.status_code, status.HTTP_201_CREATED)
        self.assertEqual(response.data['status'], 'completed')
        self.assertEqual(response.data['source'], 'api')
        self.assertEqual(response.data['owner'], 'testuser')
        self.assertEqual(response.data['summary']['steps'], 20)
        self.assertEqual(response.data['scenario']['case']['buses'], [1, 2, 3])

        record = SimulationRun.objects.get()
        self.assertEqual(record.owner, self.test_user)
        self.assertEqual(record.seed, 7)

    def test_create_with_inline_case(self):
        document = scenario_document(case=three_bus_document(), line_limits={})
        response = self.auth_client.post(self.list_url, document, format='json')
        self.assertEqual(response.status_code, status.HTTP_201_CREATED)
        self.assertIsNone(response.data['summary']['max_violation_line'])

    def test_create_rejects_paths(self):
        response = self.auth_client.post(self.list_url, scenario_document(case='../fixtures/case39.json'),
                                         format='json')
        self.assertValidationError(response, 'not found')
        self.assertEqual(SimulationRun.objects.count(), 0)

    def test_create_rejects_unknown_setting(self):
        response = self.auth_client.post(self.list_url, scenario_document(settings={'speed': 3}), format='json')
        self.assertValidationError(response, 'speed')

    def test_create_rejects_bad_line_limit(self):
        response = self.auth_client.post(self.list_url, scenario_document(line_limits={'9': 1.0}), format='json')
        self.assertValidationError(response, 'line 9')

    def test_list_and_retrieve(self):
        self.auth_client.post(self.list_url, scenario_document(), format='json')
        response = self.auth_client.get(self.list_url)
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        results = response.data['results'] if isinstance(response.data, dict) else response.data
        self.assertEqual(len(results), 1)
        self.assertNotIn('scenario', results[0])

        detail = self.auth_client.get(reverse('simulationrun-detail', args=[results[0]['id']]))
        self.assertEqual(detail.status_code, status.HTTP_200_OK)
        self.assertIn('scenario', detail.data)

    def test_other_users_runs_are_hidden(self):
        self.auth_client.post(self.list_url, scenario_document(), format='json')
        run_id = SimulationRun.objects.get().pk
        other, _ = self.get_authenticated_client(self.create_test_user())
        self.assertNotFound(other.get(reverse('simulationrun-detail', args=[run_id])))

    def test_runs_are_read_only(self):
        self.auth_client.post(self.list_url, scenario_document(), format='json')
        url = reverse('simulationrun-detail', args=[SimulationRun.objects.get().pk])
        response = self.auth_client.delete(url)
        self.assertEqual(response.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)


class CaseValidationAPITestCase(BaseAPITestCase):
    """Test suite for case validation"""

    def setUp(self):
        super().setUp()
        self.auth_client, _ = self.get_authenticated_client()
        self.url = reverse('validate-case')

    def test_valid_case(self):
        response = self.auth_client.post(self.url, three_bus_document(), format='json')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['lines'], 3)
        self.assertEqual(response.data['demand_mw'], 200.0)

    def test_invalid_case(self):
        document = three_bus_document()
        document['lines'][0]['x'] = -0.1
        response = self.auth_client.post(self.url, document, format='json')
        self.assertValidationError(response, 'reactance')

    def test_requires_authentication(self):
        self.assertUnauthorized(self.client.post(self.url, three_bus_document(), format='json'))
